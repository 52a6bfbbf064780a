#include "mcsc/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "mcsc/error.hpp"

namespace mcsc::io {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

std::vector<std::string> state_header(std::size_t k) {
  std::vector<std::string> h;
  h.reserve(k);
  for (std::size_t i = 1; i <= k; ++i) h.push_back(std::to_string(i));
  return h;
}

bool needs_quotes(const std::string& s) {
  return s.find_first_of(",\"\r\n") != std::string::npos;
}

void write_field(std::ostream& out, const std::string& s) {
  if (!needs_quotes(s)) {
    out << s;
    return;
  }
  out << '"';
  for (char c : s) {
    if (c == '"') out << '"';
    out << c;
  }
  out << '"';
}

std::int64_t parse_integer(const std::string& text) {
  std::int64_t v = 0;
  const char* end = text.data() + text.size();
  auto [p, ec] = std::from_chars(text.data(), end, v);
  if (ec == std::errc() && p == end) return v;
  const double d = parse_number(text);
  if (d != std::floor(d) || std::abs(d) > 9.0e15)
    throw Error(ErrorCode::parse_error, "expected an integer, got '" + text + "'");
  return static_cast<std::int64_t>(d);
}

bool is_missing(const std::string& s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "null";
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io_error, "cannot write " + path.string());
  return out;
}

std::vector<double> row_numbers(const std::vector<std::string>& row, std::size_t first) {
  std::vector<double> v;
  v.reserve(row.size() - first);
  for (std::size_t c = first; c < row.size(); ++c) v.push_back(parse_number(row[c]));
  return v;
}

void require_width(const CsvTable& t, std::size_t width, const std::string& what) {
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    if (t.rows[r].size() != width)
      throw Error(ErrorCode::parse_error, what + ": row " + std::to_string(r + 2) + " has " +
                                              std::to_string(t.rows[r].size()) + " fields, expected " +
                                              std::to_string(width));
}

}  // namespace

std::string format_number(double v) {
  if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "cannot write a non-finite number");
  if (v == 0.0) return "0";
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

double parse_number(const std::string& text) {
  std::size_t b = 0, e = text.size();
  while (b < e && (text[b] == ' ' || text[b] == '\t')) ++b;
  while (e > b && (text[e - 1] == ' ' || text[e - 1] == '\t')) --e;
  if (b < e && text[b] == '+') ++b;
  double v = 0.0;
  auto [p, ec] = std::from_chars(text.data() + b, text.data() + e, v);
  if (ec != std::errc() || p != text.data() + e || b == e)
    throw Error(ErrorCode::parse_error, "not a number: '" + text + "'");
  if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "non-finite value '" + text + "'");
  return v;
}

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error(ErrorCode::schema_error, "missing column '" + name + "'");
  return static_cast<std::size_t>(it - header.begin());
}

CsvTable parse_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, any = false;
  char c;
  auto end_record = [&] {
    rec.push_back(std::move(field));
    field.clear();
    if (!(rec.size() == 1 && rec[0].empty())) records.push_back(std::move(rec));
    rec.clear();
    any = false;
  };
  while (in.get(c)) {
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = any = true;
    } else if (c == ',') {
      rec.push_back(std::move(field));
      field.clear();
      any = true;
    } else if (c == '\n') {
      end_record();
    } else if (c != '\r') {
      field += c;
      any = true;
    }
  }
  if (quoted) throw Error(ErrorCode::parse_error, "unterminated quoted field");
  if (any || !field.empty()) end_record();
  if (records.empty()) throw Error(ErrorCode::parse_error, "empty CSV: a header row is required");
  CsvTable t;
  t.header = std::move(records.front());
  if (!t.header.empty() && t.header[0].rfind("\xEF\xBB\xBF", 0) == 0) t.header[0].erase(0, 3);
  t.rows.assign(std::make_move_iterator(records.begin() + 1), std::make_move_iterator(records.end()));
  return t;
}

CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  try {
    return parse_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

void write_csv(const fs::path& path, const CsvTable& table) {
  std::ofstream out = open_out(path);
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      write_field(out, row[i]);
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& row : table.rows) line(row);
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out = open_out(path);
  out << text;
  if (!out) throw Error(ErrorCode::io_error, "failed writing " + path.string());
}

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::parse_error, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const Json& doc) { write_text(path, doc.dump(2) + "\n"); }

void write_trajectories(const fs::path& path, const std::vector<models::Trajectory>& trajectories) {
  CsvTable t;
  const std::size_t dim = trajectories.empty() ? 0 : trajectories.front().points.dim();
  t.header = {"individual_id", "t"};
  for (std::size_t d = 1; d <= dim; ++d) t.header.push_back("x_" + std::to_string(d));
  for (const auto& tr : trajectories) {
    if (tr.points.dim() != dim) throw Error(ErrorCode::dimension_mismatch, "trajectories differ in dimension");
    for (std::size_t n = 0; n < tr.points.size(); ++n) {
      std::vector<std::string> row{tr.individual, format_number(tr.times[n])};
      for (double x : tr.points[n]) row.push_back(format_number(x));
      t.rows.push_back(std::move(row));
    }
  }
  write_csv(path, t);
}

std::vector<models::Trajectory> read_trajectories(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 3) throw Error(ErrorCode::schema_error, path.string() + ": need individual_id,t,x_1..");
  CsvMapping m;
  m.individual = t.header[0];
  m.time = t.header[1];
  m.variables.assign(t.header.begin() + 2, t.header.end());
  return ingest_csv(path, m).trajectories;
}

void write_labels(const fs::path& path, const chain::LabeledSeries& series) {
  CsvTable t;
  t.header = {"individual_id", "t", "state"};
  for (const auto& r : series.records())
    t.rows.push_back({r.individual, std::to_string(r.time), std::to_string(r.label)});
  write_csv(path, t);
}

chain::LabeledSeries read_labels(const fs::path& path, std::size_t states) {
  const CsvTable t = read_csv(path);
  const std::size_t ci = t.column("individual_id"), ct = t.column("t"), cs = t.column("state");
  require_width(t, t.header.size(), path.string());
  std::vector<chain::Observation> obs;
  obs.reserve(t.rows.size());
  for (const auto& row : t.rows)
    obs.push_back({row[ci], parse_integer(row[ct]), static_cast<int>(parse_integer(row[cs]))});
  return chain::LabeledSeries(std::move(obs), states);
}

void write_events(const fs::path& path, const chain::EventSet& events) {
  CsvTable t;
  t.header = {"m", "t", "i", "j"};
  for (const auto& e : events.events)
    t.rows.push_back({e.individual, std::to_string(e.time), std::to_string(e.from), std::to_string(e.to)});
  write_csv(path, t);
}

chain::EventSet read_events(const fs::path& path, std::size_t states) {
  const CsvTable t = read_csv(path);
  const std::size_t cm = t.column("m"), ct = t.column("t"), ci = t.column("i"), cj = t.column("j");
  require_width(t, t.header.size(), path.string());
  chain::EventSet set;
  set.states = states;
  for (const auto& row : t.rows) {
    chain::Event e{row[cm], parse_integer(row[ct]), static_cast<int>(parse_integer(row[ci])),
                   static_cast<int>(parse_integer(row[cj]))};
    if (e.from < 1 || e.to < 1 || static_cast<std::size_t>(std::max(e.from, e.to)) > states)
      throw Error(ErrorCode::invalid_argument, path.string() + ": event state outside 1.." + std::to_string(states));
    set.events.push_back(std::move(e));
  }
  return set;
}

void write_matrix(const fs::path& path, const Matrix& m) {
  CsvTable t;
  t.header = state_header(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(format_number(m(r, c)));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

Matrix read_matrix(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t k = t.header.size();
  require_width(t, k, path.string());
  Matrix m(idx(t.rows.size()), idx(k));
  for (std::size_t r = 0; r < t.rows.size(); ++r)
    for (std::size_t c = 0; c < k; ++c) m(idx(r), idx(c)) = parse_number(t.rows[r][c]);
  return m;
}

TransitionMatrix read_transition(const fs::path& path) {
  Matrix m = read_matrix(path);
  if (m.rows() != m.cols())
    throw Error(ErrorCode::dimension_mismatch, path.string() + ": transition matrix is not square");
  return TransitionMatrix(std::move(m));
}

Json to_json(const TransitionMatrix& a) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < a.matrix().rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < a.matrix().cols(); ++c) row.push_back(a.matrix()(r, c));
    rows.push_back(std::move(row));
  }
  return Json{{"states", a.size()}, {"layout", "row_major_to_from"}, {"entries", std::move(rows)}};
}

TransitionMatrix transition_from_json(const Json& doc) {
  try {
    const auto& rows = doc.at("entries");
    const std::size_t k = rows.size();
    Matrix m(idx(k), idx(k));
    for (std::size_t r = 0; r < k; ++r) {
      if (rows[r].size() != k) throw Error(ErrorCode::dimension_mismatch, "transition matrix is not square");
      for (std::size_t c = 0; c < k; ++c) m(idx(r), idx(c)) = rows[r][c].get<double>();
    }
    return TransitionMatrix(std::move(m));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("transition matrix JSON: ") + e.what());
  }
}

Json to_json(const Distribution& z) {
  Json p = Json::array();
  for (std::size_t i = 0; i < z.size(); ++i) p.push_back(z[i]);
  return Json{{"states", z.size()}, {"probabilities", std::move(p)}};
}

Distribution distribution_from_json(const Json& doc) {
  try {
    const auto& p = doc.at("probabilities");
    Vector z(idx(p.size()));
    for (std::size_t i = 0; i < p.size(); ++i) z(idx(i)) = p[i].get<double>();
    return Distribution(std::move(z));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("distribution JSON: ") + e.what());
  }
}

void write_distribution(const fs::path& path, const Distribution& z) {
  CsvTable t;
  t.header = state_header(z.size());
  std::vector<std::string> row;
  for (std::size_t i = 0; i < z.size(); ++i) row.push_back(format_number(z[i]));
  t.rows.push_back(std::move(row));
  write_csv(path, t);
}

Distribution read_distribution(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.rows.size() != 1) throw Error(ErrorCode::schema_error, path.string() + ": expected one data row");
  require_width(t, t.header.size(), path.string());
  const auto v = row_numbers(t.rows[0], 0);
  return Distribution(Eigen::Map<const Vector>(v.data(), idx(v.size())));
}

void write_series(const fs::path& path, const DistributionSeries& series) {
  CsvTable t;
  t.header = {"time"};
  for (std::size_t i = 1; i <= series.states(); ++i) t.header.push_back("z_" + std::to_string(i));
  for (std::size_t n = 0; n < series.size(); ++n) {
    std::vector<std::string> row{format_number(series.times[n])};
    for (std::size_t i = 0; i < series.points[n].size(); ++i) row.push_back(format_number(series.points[n][i]));
    t.rows.push_back(std::move(row));
  }
  write_csv(path, t);
}

DistributionSeries read_series(const fs::path& path) {
  const CsvTable t = read_csv(path);
  if (t.header.size() < 2 || t.header[0] != "time")
    throw Error(ErrorCode::schema_error, path.string() + ": expected columns time,z_1..z_K");
  require_width(t, t.header.size(), path.string());
  DistributionSeries s;
  for (const auto& row : t.rows) {
    s.times.push_back(parse_number(row[0]));
    const auto v = row_numbers(row, 1);
    s.points.emplace_back(Eigen::Map<const Vector>(v.data(), idx(v.size())));
  }
  s.validate();
  return s;
}

void write_transport_plan(const fs::path& path, const transport::TransportPlan& plan) {
  write_matrix(path, plan.flow);
}

void write_control_plan(const fs::path& path, const control::ControlPlan& plan) {
  CsvTable t;
  t.header = {"from_state", "to_state", "original_prob", "controlled_prob", "cumulative_suppression"};
  for (const auto& iv : plan.interventions)
    t.rows.push_back({std::to_string(iv.site.from + 1), std::to_string(iv.site.to + 1), format_number(iv.original),
                      format_number(iv.controlled), format_number(iv.cumulative_suppression)});
  write_csv(path, t);
}

std::vector<control::Intervention> read_control_plan(const fs::path& path) {
  const CsvTable t = read_csv(path);
  const std::size_t cf = t.column("from_state"), ct = t.column("to_state"), co = t.column("original_prob"),
                    cc = t.column("controlled_prob"), cs = t.column("cumulative_suppression");
  require_width(t, t.header.size(), path.string());
  std::vector<control::Intervention> out;
  for (const auto& row : t.rows) {
    const auto from = parse_integer(row[cf]), to = parse_integer(row[ct]);
    if (from < 1 || to < 1) throw Error(ErrorCode::invalid_argument, path.string() + ": states are 1-based");
    out.push_back({{static_cast<std::size_t>(from - 1), static_cast<std::size_t>(to - 1)},
                   parse_number(row[co]),
                   parse_number(row[cc]),
                   parse_number(row[cs])});
  }
  return out;
}

Json control_summary(const control::ControlPlan& plan, const control::ControlConfig& config) {
  Json horizon;
  if (config.horizon.kind == control::HorizonKind::stationary) {
    horizon = Json{{"kind", "stationary"}};
  } else {
    Json init = Json::array();
    for (Eigen::Index i = 0; i < config.horizon.initial.size(); ++i) init.push_back(config.horizon.initial(i));
    horizon = Json{{"kind", "finite"}, {"tau", config.horizon.tau}, {"initial", std::move(init)}};
  }
  Json ivs = Json::array();
  for (const auto& iv : plan.interventions)
    ivs.push_back({{"from_state", iv.site.from + 1},
                   {"to_state", iv.site.to + 1},
                   {"original_prob", iv.original},
                   {"controlled_prob", iv.controlled},
                   {"cumulative_suppression", iv.cumulative_suppression}});
  return Json{{"schema_version", kSchemaVersion},
              {"lambda1", config.lambda1},
              {"lambda2", config.lambda2},
              {"H", config.suppression_levels},
              {"candidate_fraction", config.candidate_fraction},
              {"probe_suppression", config.probe_suppression},
              {"ranking", config.ranking == control::CandidateRanking::flow ? "flow" : "probability"},
              {"horizon", std::move(horizon)},
              {"iterations", plan.objective_trace.empty() ? 0 : plan.objective_trace.size() - 1},
              {"G_trace", plan.objective_trace},
              {"interventions", std::move(ivs)}};
}

Json to_json(const geometry::Partition& partition) {
  Json doc;
  if (partition.kind() == geometry::PartitionKind::per_axis) {
    doc["kind"] = "per_axis";
    doc["edges"] = partition.edges();
  } else {
    doc["kind"] = "representatives";
    Json reps = Json::array();
    const auto& r = partition.representatives();
    for (std::size_t n = 0; n < r.size(); ++n) reps.push_back(std::vector<double>(r[n].begin(), r[n].end()));
    doc["representatives"] = std::move(reps);
  }
  doc["distance"] = "euclidean";
  return doc;
}

geometry::Partition partition_from_json(const Json& doc) {
  try {
    const std::string kind = doc.at("kind").get<std::string>();
    if (doc.contains("distance") && doc.at("distance").get<std::string>() != "euclidean")
      throw Error(ErrorCode::schema_error, "unsupported partition distance");
    if (kind == "per_axis") return geometry::Partition::per_axis(doc.at("edges").get<std::vector<std::vector<double>>>());
    if (kind == "representatives") {
      const auto rows = doc.at("representatives").get<std::vector<std::vector<double>>>();
      if (rows.empty()) throw Error(ErrorCode::schema_error, "partition has no representatives");
      PointSet ps(rows.front().size());
      for (const auto& r : rows) {
        if (r.size() != ps.dim()) throw Error(ErrorCode::dimension_mismatch, "representatives differ in dimension");
        ps.push_back(r);
      }
      return geometry::Partition::voronoi(std::move(ps));
    }
    throw Error(ErrorCode::schema_error, "unknown partition kind '" + kind + "'");
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::schema_error, std::string("partition JSON: ") + e.what());
  }
}

PointSet read_points(const fs::path& path) {
  const CsvTable t = read_csv(path);
  require_width(t, t.header.size(), path.string());
  PointSet ps(t.header.size());
  for (const auto& row : t.rows) ps.push_back(row_numbers(row, 0));
  return ps;
}

Ingested ingest_csv(const fs::path& path, const CsvMapping& mapping) {
  if (mapping.variables.empty()) throw Error(ErrorCode::schema_error, "mapping names no variable columns");
  if (!(mapping.malformed_tolerance >= 0.0 && mapping.malformed_tolerance <= 1.0))
    throw Error(ErrorCode::invalid_argument, "malformed_tolerance must lie in [0, 1]");
  const CsvTable t = read_csv(path);
  const std::size_t ci = t.column(mapping.individual), ct = t.column(mapping.time);
  std::vector<std::size_t> cv;
  for (const auto& v : mapping.variables) cv.push_back(t.column(v));

  Ingested out;
  auto& rep = out.report;
  rep.rows_read = t.rows.size();
  rep.missing_per_variable.assign(cv.size(), 0);
  for (const auto& c : mapping.categorical) {
    if (std::find(mapping.variables.begin(), mapping.variables.end(), c) == mapping.variables.end())
      throw Error(ErrorCode::schema_error, "categorical column '" + c + "' is not a mapped variable");
    rep.warnings.push_back("column '" + c +
                           "' is categorical; its numeric codes are treated as coordinates and distances "
                           "between codes have no intrinsic meaning");
  }

  std::unordered_map<std::string, std::size_t> slot;
  std::vector<std::vector<std::pair<double, std::vector<double>>>> rows_by_individual;
  std::vector<std::string> names;
  std::size_t first_bad_line = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) {
      if (rep.rows_malformed++ == 0) first_bad_line = r + 2;
      continue;
    }
    bool missing = false;
    for (std::size_t v = 0; v < cv.size(); ++v)
      if (is_missing(row[cv[v]])) {
        ++rep.missing_per_variable[v];
        missing = true;
      }
    if (missing || row[ci].empty() || is_missing(row[ct])) {
      ++rep.rows_dropped_missing;
      continue;
    }
    double time = 0.0;
    std::vector<double> x;
    try {
      time = parse_number(row[ct]);
      for (std::size_t c : cv) x.push_back(parse_number(row[c]));
    } catch (const Error&) {
      if (rep.rows_malformed++ == 0) first_bad_line = r + 2;
      continue;
    }
    auto [it, inserted] = slot.emplace(row[ci], names.size());
    if (inserted) {
      names.push_back(row[ci]);
      rows_by_individual.emplace_back();
    }
    rows_by_individual[it->second].emplace_back(time, std::move(x));
  }

  if (rep.rows_read > 0 &&
      static_cast<double>(rep.rows_malformed) > mapping.malformed_tolerance * static_cast<double>(rep.rows_read))
    throw Error(ErrorCode::parse_error, path.string() + ": " + std::to_string(rep.rows_malformed) +
                                            " malformed rows (first at line " + std::to_string(first_bad_line) +
                                            ") exceed the tolerance");
  if (rep.rows_malformed > 0)
    rep.warnings.push_back(std::to_string(rep.rows_malformed) + " malformed rows skipped");
  if (rep.rows_dropped_missing > 0) {
    std::string w = std::to_string(rep.rows_dropped_missing) + " rows dropped for missing values (";
    for (std::size_t v = 0; v < cv.size(); ++v) {
      if (v) w += ", ";
      w += mapping.variables[v] + ": " + std::to_string(rep.missing_per_variable[v]);
    }
    w += "); consider excluding variables with many missing values";
    rep.warnings.push_back(std::move(w));
  }

  for (std::size_t m = 0; m < names.size(); ++m) {
    auto& rows = rows_by_individual[m];
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t n = 1; n < rows.size(); ++n)
      if (rows[n].first == rows[n - 1].first)
        throw Error(ErrorCode::duplicate_record,
                    path.string() + ": duplicate record for individual '" + names[m] + "' at time " +
                        format_number(rows[n].first));
    models::Trajectory tr;
    tr.individual = names[m];
    tr.points = PointSet(cv.size());
    for (auto& [time, x] : rows) {
      tr.times.push_back(time);
      tr.points.push_back(x);
    }
    out.trajectories.push_back(std::move(tr));
  }
  return out;
}

}  // namespace mcsc::io
