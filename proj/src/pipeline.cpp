#include "mcsc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include "mcsc/report.hpp"
#include "mcsc/transport.hpp"

namespace mcsc::pipeline {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

[[noreturn]] void schema(const std::string& msg) { throw Error(ErrorCode::schema_error, msg); }

void check_keys(const Json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) schema(where + " must be an object");
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || item.key() == a;
    if (!ok) schema("unknown key '" + item.key() + "' in " + where);
  }
}

template <class T>
T get_or(const Json& obj, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const Json::exception& e) {
    schema(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <class F>
auto in_stage(const char* stage, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::filesystem::filesystem_error& e) {
    throw StageError(stage, Error(ErrorCode::io_error, e.what()));
  }
}

models::SimConfig parse_model(const Json& m, std::uint64_t seed) {
  check_keys(m,
             {"kind", "steps", "dt", "sigma", "trials", "seed", "initial", "transient_steps", "theta", "rho",
              "lorenz_sigma", "beta", "a", "b", "c"},
             "input.model");
  if (!m.contains("kind")) schema("input.model.kind is required");
  auto c = models::SimConfig::defaults(models::model_from_string(m.at("kind").get<std::string>()));
  c.steps = get_or(m, "steps", c.steps);
  c.dt = get_or(m, "dt", c.dt);
  c.sigma = get_or(m, "sigma", c.sigma);
  c.trials = get_or(m, "trials", c.trials);
  c.seed = get_or(m, "seed", seed);
  c.initial = get_or(m, "initial", c.initial);
  c.transient_steps = get_or(m, "transient_steps", c.transient_steps);
  c.theta = get_or(m, "theta", c.theta);
  c.rho = get_or(m, "rho", c.rho);
  c.lorenz_sigma = get_or(m, "lorenz_sigma", c.lorenz_sigma);
  c.beta = get_or(m, "beta", c.beta);
  c.a = get_or(m, "a", c.a);
  c.b = get_or(m, "b", c.b);
  c.c = get_or(m, "c", c.c);
  c.validate();
  return c;
}

std::size_t dummy_states(const Workspace& ws) {
  return ws.config.resetting == chain::ResetMode::dummy ? 1 : 0;
}

Vector pad(const Vector& v, std::size_t k) {
  Vector out = Vector::Zero(idx(k));
  out.head(v.size()) = v;
  return out;
}

std::vector<chain::Observation> to_observations(const std::vector<models::Trajectory>& trs,
                                                const geometry::Partition& part) {
  std::vector<chain::Observation> obs;
  for (const auto& tr : trs) {
    const auto labels = part.labels(tr.points);
    for (std::size_t n = 0; n < labels.size(); ++n) {
      const double t = tr.times[n];
      if (t != std::floor(t) || std::abs(t) > 9.0e15)
        throw Error(ErrorCode::invalid_argument,
                    "observation times must be integers; got " + io::format_number(t) + " for '" + tr.individual +
                        "'");
      obs.push_back({tr.individual, static_cast<std::int64_t>(t), labels[n]});
    }
  }
  return obs;
}

PointSet pooled_points(const std::vector<models::Trajectory>& trs) {
  if (trs.empty()) throw Error(ErrorCode::insufficient_data, "no data points");
  PointSet ps(trs.front().points.dim());
  for (const auto& tr : trs)
    for (std::size_t n = 0; n < tr.points.size(); ++n) ps.push_back(tr.points[n]);
  return ps;
}

void ensure_trajectories(Workspace& ws) {
  if (!ws.trajectories.empty()) return;
  if (ws.config.input == PipelineConfig::Input::csv) {
    stage_input(ws);
    return;
  }
  const fs::path p = ws.path(files::trajectories);
  if (!fs::exists(p)) throw Error(ErrorCode::io_error, p.string() + " not found; run the simulate stage first");
  ws.trajectories = io::read_trajectories(p);
}

void ensure_series(Workspace& ws) {
  if (ws.series) return;
  ws.series = io::read_series(ws.config.series_path);
}

void ensure_partition(Workspace& ws) {
  if (ws.partition) return;
  ws.partition = io::partition_from_json(io::read_json(ws.path(files::partition)));
}

void ensure_labels(Workspace& ws) {
  if (ws.labels) return;
  ensure_partition(ws);
  ws.labels = io::read_labels(ws.path(files::labels), ws.partition->states());
}

void ensure_transition(Workspace& ws) {
  if (ws.a) return;
  ws.a = io::read_transition(ws.path(files::transition));
}

// Distribution over all chain states (partition cells plus any dummy state).
Vector resolve_initial(Workspace& ws, const InitialSpec& spec, std::size_t k) {
  switch (spec.kind) {
    case InitialSpec::Kind::uniform:
      return Distribution::uniform(k).vector();
    case InitialSpec::Kind::stationary:
      if (!ws.stationary) ws.stationary = chain::stationary(*ws.a);
      return ws.stationary->vector();
    case InitialSpec::Kind::explicit_values: {
      if (spec.values.size() != k)
        throw Error(ErrorCode::dimension_mismatch,
                    "initial distribution has " + std::to_string(spec.values.size()) + " entries, chain has " +
                        std::to_string(k) + " states");
      Vector v(idx(k));
      for (std::size_t i = 0; i < k; ++i) v(idx(i)) = spec.values[i];
      return Distribution(v).vector();
    }
    case InitialSpec::Kind::first_observations:
      break;
  }
  if (ws.config.input == PipelineConfig::Input::distribution_series) {
    ensure_series(ws);
    return pad(ws.series->points.front().vector(), k);
  }
  ensure_labels(ws);
  return pad(ws.labels->initial_histogram(), k);
}

Json per_axis_json(const PipelineConfig& c) {
  return Json{{"stage", "partition"},
              {"kind", "per_axis"},
              {"bins", c.bins},
              {"edges", c.edge_rule == geometry::EdgeRule::quantile ? "quantile" : "uniform"}};
}

}  // namespace

bool AxisCondition::holds(std::span<const double> point) const {
  if (axis >= point.size()) throw Error(ErrorCode::dimension_mismatch, "reward rule refers to a missing axis");
  const double x = point[axis];
  if (op == "<") return x < value;
  if (op == "<=") return x <= value;
  if (op == ">") return x > value;
  if (op == ">=") return x >= value;
  if (op == "==") return x == value;
  if (op == "!=") return x != value;
  throw Error(ErrorCode::schema_error, "unknown comparison '" + op + "'");
}

Vector RewardSpec::resolve(const PointSet& centers, std::size_t extra_states) const {
  const std::size_t k = centers.size();
  Vector r = Vector::Constant(idx(k + extra_states), fallback);
  switch (kind) {
    case Kind::values:
      if (values.size() != k && values.size() != k + extra_states)
        throw Error(ErrorCode::dimension_mismatch, "reward has " + std::to_string(values.size()) +
                                                       " values, partition has " + std::to_string(k) + " states");
      for (std::size_t i = 0; i < values.size(); ++i) r(idx(i)) = values[i];
      break;
    case Kind::rules:
      for (std::size_t i = 0; i < k; ++i)
        for (const auto& rule : rules)
          if (std::all_of(rule.when.begin(), rule.when.end(), [&](const auto& c) { return c.holds(centers[i]); })) {
            r(idx(i)) = rule.value;
            break;
          }
      break;
    case Kind::states:
      for (std::size_t i = 0; i < k; ++i) r(idx(i)) = outside;
      for (int s : states) {
        if (s < 1 || static_cast<std::size_t>(s) > k)
          throw Error(ErrorCode::invalid_argument, "reward state " + std::to_string(s) + " outside 1.." +
                                                       std::to_string(k));
        r(s - 1) = inside;
      }
      break;
  }
  for (Eigen::Index i = 0; i < r.size(); ++i)
    if (!std::isfinite(r(i))) throw Error(ErrorCode::non_finite, "reward has a non-finite entry");
  return r;
}

RewardSpec RewardSpec::from_json(const Json& doc) {
  RewardSpec s;
  if (doc.contains("values")) {
    check_keys(doc, {"values", "default"}, "control.reward");
    s.kind = Kind::values;
    s.values = doc.at("values").get<std::vector<double>>();
    s.fallback = get_or(doc, "default", 0.0);
  } else if (doc.contains("rules")) {
    check_keys(doc, {"rules", "default"}, "control.reward");
    s.kind = Kind::rules;
    s.fallback = get_or(doc, "default", 0.0);
    for (const auto& r : doc.at("rules")) {
      check_keys(r, {"when", "value"}, "control.reward.rules[]");
      RewardRule rule;
      rule.value = r.at("value").get<double>();
      for (const auto& c : r.value("when", Json::array())) {
        check_keys(c, {"axis", "op", "value"}, "control.reward.rules[].when[]");
        const auto axis = c.at("axis").get<std::size_t>();
        if (axis < 1) schema("reward axes are 1-based");
        rule.when.push_back({axis - 1, c.at("op").get<std::string>(), c.at("value").get<double>()});
      }
      s.rules.push_back(std::move(rule));
    }
  } else if (doc.contains("states")) {
    check_keys(doc, {"states", "inside", "outside"}, "control.reward");
    s.kind = Kind::states;
    s.states = doc.at("states").get<std::vector<int>>();
    s.inside = get_or(doc, "inside", 1.0);
    s.outside = get_or(doc, "outside", -1.0);
    s.fallback = 0.0;
  } else {
    schema("control.reward needs one of 'values', 'rules' or 'states'");
  }
  return s;
}

InitialSpec InitialSpec::from_json(const Json& doc) {
  InitialSpec s;
  if (doc.is_array()) {
    s.kind = Kind::explicit_values;
    s.values = doc.get<std::vector<double>>();
    return s;
  }
  const auto name = doc.get<std::string>();
  if (name == "first_observations") s.kind = Kind::first_observations;
  else if (name == "uniform") s.kind = Kind::uniform;
  else if (name == "stationary") s.kind = Kind::stationary;
  else schema("unknown initial distribution '" + name + "'");
  return s;
}

PipelineConfig PipelineConfig::from_json(const Json& doc) {
  try {
    check_keys(doc, {"schema_version", "seed", "input", "partition", "estimator", "matching", "control", "evolve",
                     "outputs"},
               "config");
    if (get_or(doc, "schema_version", io::kSchemaVersion) != io::kSchemaVersion)
      schema("unsupported schema_version");
    PipelineConfig c;
    c.source = doc;
    c.seed = get_or<std::uint64_t>(doc, "seed", 0);
    c.partition_seed = c.seed;

    if (!doc.contains("input")) schema("config.input is required");
    const Json& in = doc.at("input");
    check_keys(in, {"model", "csv", "distribution_series"}, "input");
    if (in.size() != 1) schema("input must name exactly one source");
    if (in.contains("model")) {
      c.input = Input::model;
      c.model = parse_model(in.at("model"), c.seed);
    } else if (in.contains("csv")) {
      const Json& v = in.at("csv");
      check_keys(v, {"path", "individual", "time", "variables", "categorical", "malformed_tolerance"}, "input.csv");
      c.input = Input::csv;
      c.csv_path = v.at("path").get<std::string>();
      c.csv.individual = get_or<std::string>(v, "individual", c.csv.individual);
      c.csv.time = get_or<std::string>(v, "time", c.csv.time);
      c.csv.variables = v.at("variables").get<std::vector<std::string>>();
      c.csv.categorical = get_or(v, "categorical", c.csv.categorical);
      c.csv.malformed_tolerance = get_or(v, "malformed_tolerance", 0.0);
    } else {
      const Json& v = in.at("distribution_series");
      check_keys(v, {"path", "representatives"}, "input.distribution_series");
      c.input = Input::distribution_series;
      c.series_path = v.at("path").get<std::string>();
      c.representatives_path = v.at("representatives").get<std::string>();
    }

    if (doc.contains("partition")) {
      const Json& p = doc.at("partition");
      check_keys(p, {"kind", "bins", "edges", "k", "seed", "max_iterations", "path"}, "partition");
      const auto kind = get_or<std::string>(p, "kind", "per_axis");
      if (kind == "per_axis") {
        c.partition = PartitionKind::per_axis;
        c.bins = get_or(p, "bins", c.bins);
        const auto edges = get_or<std::string>(p, "edges", "quantile");
        if (edges == "quantile") c.edge_rule = geometry::EdgeRule::quantile;
        else if (edges == "uniform") c.edge_rule = geometry::EdgeRule::uniform_range;
        else schema("partition.edges must be 'quantile' or 'uniform'");
      } else if (kind == "kmeans" || kind == "sample") {
        c.partition = kind == "kmeans" ? PartitionKind::kmeans : PartitionKind::sample;
        c.clusters = p.at("k").get<std::size_t>();
        c.partition_seed = get_or(p, "seed", c.seed);
        c.kmeans_max_iterations = get_or(p, "max_iterations", c.kmeans_max_iterations);
      } else if (kind == "file") {
        c.partition = PartitionKind::file;
        c.partition_path = p.at("path").get<std::string>();
      } else {
        schema("unknown partition kind '" + kind + "'");
      }
    }

    if (doc.contains("estimator")) {
      const Json& e = doc.at("estimator");
      check_keys(e, {"kind", "eta", "smoothing_gamma", "damping", "resetting", "time_step", "bridge_gaps"},
                 "estimator");
      const auto kind = get_or<std::string>(e, "kind", "relative");
      if (kind == "relative") c.estimator = Estimator::relative;
      else if (kind == "weighted") c.estimator = Estimator::weighted;
      else schema("estimator.kind must be 'relative' or 'weighted'");
      c.eta = get_or(e, "eta", c.eta);
      if (e.contains("smoothing_gamma") && !e.at("smoothing_gamma").is_null())
        c.gamma = e.at("smoothing_gamma").get<double>();
      c.epsilon = get_or(e, "damping", c.epsilon);
      const auto reset = get_or<std::string>(e, "resetting", "off");
      if (reset == "off") c.resetting = chain::ResetMode::none;
      else if (reset == "loop") c.resetting = chain::ResetMode::loop;
      else if (reset == "dummy") c.resetting = chain::ResetMode::dummy;
      else schema("estimator.resetting must be 'off', 'loop' or 'dummy'");
      c.events.time_step = get_or<std::int64_t>(e, "time_step", 1);
      c.events.bridge_gaps = get_or(e, "bridge_gaps", false);
    }
    if (c.gamma && c.resetting == chain::ResetMode::dummy)
      schema("smoothing needs a distance for every state; the dummy reset state has none");

    if (doc.contains("matching")) {
      const Json& m = doc.at("matching");
      check_keys(m, {"kind", "grid", "step", "window"}, "matching");
      if (get_or<std::string>(m, "kind", "ot") != "ot") schema("matching.kind must be 'ot'");
      if (c.input != Input::distribution_series) schema("matching applies to distribution_series input only");
      c.regrid_grid = get_or(m, "grid", c.regrid_grid);
      c.regrid_step = get_or(m, "step", 0.0);
      c.regrid_window = get_or<std::size_t>(m, "window", 0);
      if (!c.regrid_grid.empty() && c.regrid_step > 0.0) schema("matching takes either 'grid' or 'step'");
    }

    if (doc.contains("control")) {
      const Json& k = doc.at("control");
      check_keys(k, {"enabled", "lambda1", "lambda2", "H", "candidate_fraction", "probe_suppression", "ranking",
                     "max_iterations", "reward", "horizon"},
                 "control");
      c.control_enabled = get_or(k, "enabled", true);
      auto& cc = c.control;
      cc.lambda1 = get_or(k, "lambda1", cc.lambda1);
      cc.lambda2 = get_or(k, "lambda2", cc.lambda2);
      cc.suppression_levels = get_or(k, "H", cc.suppression_levels);
      cc.candidate_fraction = get_or(k, "candidate_fraction", cc.candidate_fraction);
      cc.probe_suppression = get_or(k, "probe_suppression", cc.probe_suppression);
      cc.max_iterations = get_or(k, "max_iterations", cc.max_iterations);
      const auto ranking = get_or<std::string>(k, "ranking", "probability");
      if (ranking == "probability") cc.ranking = control::CandidateRanking::probability;
      else if (ranking == "flow") cc.ranking = control::CandidateRanking::flow;
      else schema("control.ranking must be 'probability' or 'flow'");
      if (c.control_enabled) {
        if (!k.contains("reward")) schema("control.reward is required");
        c.reward = RewardSpec::from_json(k.at("reward"));
      }
      if (k.contains("horizon")) {
        const Json& h = k.at("horizon");
        check_keys(h, {"kind", "tau", "initial"}, "control.horizon");
        const auto kind = get_or<std::string>(h, "kind", "stationary");
        if (kind == "finite") {
          c.finite_horizon = true;
          c.tau = get_or<std::size_t>(h, "tau", 0);
          if (h.contains("initial")) c.horizon_initial = InitialSpec::from_json(h.at("initial"));
        } else if (kind != "stationary") {
          schema("control.horizon.kind must be 'stationary' or 'finite'");
        }
      }
    } else {
      c.control_enabled = false;
    }
    if (c.input == Input::distribution_series && c.control_enabled && !c.finite_horizon)
      schema("distribution_series input needs a finite control horizon");

    if (doc.contains("evolve")) {
      const Json& e = doc.at("evolve");
      check_keys(e, {"steps", "initial"}, "evolve");
      c.evolve_steps = get_or(e, "steps", c.evolve_steps);
      if (e.contains("initial")) c.evolve_initial = InitialSpec::from_json(e.at("initial"));
    }
    if (doc.contains("outputs")) {
      check_keys(doc.at("outputs"), {"dir"}, "outputs");
      c.output_dir = get_or<std::string>(doc.at("outputs"), "dir", c.output_dir.string());
    }
    return c;
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError("config", e);
  } catch (const Json::exception& e) {
    throw StageError("config", Error(ErrorCode::schema_error, e.what()));
  }
}

PipelineConfig load_config(const fs::path& path) {
  Json doc = in_stage("config", [&] { return io::read_json(path); });
  return PipelineConfig::from_json(doc);
}

void apply_overrides(Json& doc, const Overrides& o) {
  if (o.seed) {
    doc["seed"] = *o.seed;
    if (doc.contains("input") && doc["input"].contains("model")) doc["input"]["model"].erase("seed");
    if (doc.contains("partition")) doc["partition"].erase("seed");
  }
  if (o.lambda1) doc["control"]["lambda1"] = *o.lambda1;
  if (o.lambda2) doc["control"]["lambda2"] = *o.lambda2;
  if (o.output_dir) doc["outputs"]["dir"] = o.output_dir->string();
}

void stage_input(Workspace& ws) {
  in_stage("input", [&] {
    const auto& c = ws.config;
    switch (c.input) {
      case PipelineConfig::Input::model:
        ws.trajectories = models::simulate(c.model);
        io::write_trajectories(ws.path(files::trajectories), ws.trajectories);
        ws.stages.push_back({{"stage", "simulate"},
                             {"model", models::to_string(c.model.model)},
                             {"steps", c.model.steps},
                             {"dt", c.model.dt},
                             {"sigma", c.model.sigma},
                             {"trials", c.model.trials},
                             {"seed", c.model.seed}});
        break;
      case PipelineConfig::Input::csv: {
        auto got = io::ingest_csv(c.csv_path, c.csv);
        ws.trajectories = std::move(got.trajectories);
        for (auto& w : got.report.warnings) ws.warnings.push_back(std::move(w));
        io::write_trajectories(ws.path(files::trajectories), ws.trajectories);
        ws.stages.push_back({{"stage", "ingest"},
                             {"path", c.csv_path.string()},
                             {"rows_read", got.report.rows_read},
                             {"rows_dropped_missing", got.report.rows_dropped_missing},
                             {"rows_malformed", got.report.rows_malformed},
                             {"individuals", ws.trajectories.size()}});
        break;
      }
      case PipelineConfig::Input::distribution_series:
        ws.series = io::read_series(c.series_path);
        ws.stages.push_back({{"stage", "read_series"}, {"path", c.series_path.string()},
                             {"time_points", ws.series->size()}, {"states", ws.series->states()}});
        break;
    }
  });
}

void stage_discretize(Workspace& ws) {
  in_stage("partition", [&] {
    const auto& c = ws.config;
    if (c.input == PipelineConfig::Input::distribution_series) {
      ensure_series(ws);
      ws.partition = geometry::Partition::voronoi(io::read_points(c.representatives_path));
      if (ws.partition->states() != ws.series->states())
        throw Error(ErrorCode::dimension_mismatch, "representatives and series disagree on the state count");
      io::write_json(ws.path(files::partition), io::to_json(*ws.partition));
      ws.stages.push_back({{"stage", "partition"}, {"kind", "representatives"}, {"states", ws.partition->states()}});
      return;
    }
    ensure_trajectories(ws);
    const PointSet points = pooled_points(ws.trajectories);
    Json entry;
    switch (c.partition) {
      case PipelineConfig::PartitionKind::per_axis:
        ws.partition = geometry::partition_per_axis(points, c.bins, c.edge_rule);
        entry = per_axis_json(c);
        break;
      case PipelineConfig::PartitionKind::kmeans: {
        auto fit = geometry::kmeans(points, c.clusters, c.partition_seed, c.kmeans_max_iterations);
        ws.partition = std::move(fit.partition);
        entry = {{"stage", "partition"}, {"kind", "kmeans"}, {"k", c.clusters}, {"seed", c.partition_seed},
                 {"iterations", fit.iterations}, {"converged", fit.converged}};
        if (!fit.converged) ws.warnings.push_back("k-means stopped at the iteration cap before converging");
        break;
      }
      case PipelineConfig::PartitionKind::sample:
        ws.partition = geometry::sample_representatives(points, c.clusters, c.partition_seed);
        entry = {{"stage", "partition"}, {"kind", "sample"}, {"k", c.clusters}, {"seed", c.partition_seed}};
        break;
      case PipelineConfig::PartitionKind::file:
        ws.partition = io::partition_from_json(io::read_json(c.partition_path));
        entry = {{"stage", "partition"}, {"kind", "file"}, {"path", c.partition_path.string()}};
        break;
    }
    if (ws.partition->dim() != points.dim())
      throw Error(ErrorCode::dimension_mismatch, "partition dimension differs from the data");
    entry["states"] = ws.partition->states();
    ws.stages.push_back(std::move(entry));
    io::write_json(ws.path(files::partition), io::to_json(*ws.partition));
  });
  if (ws.config.input == PipelineConfig::Input::distribution_series) return;
  in_stage("labels", [&] {
    ws.labels = chain::LabeledSeries(to_observations(ws.trajectories, *ws.partition), ws.partition->states());
    io::write_labels(ws.path(files::labels), *ws.labels);
  });
}

void stage_estimate(Workspace& ws) {
  const auto& c = ws.config;
  if (c.input == PipelineConfig::Input::distribution_series) {
    in_stage("matching", [&] {
      ensure_series(ws);
      ensure_partition(ws);
      DistributionSeries s = *ws.series;
      std::vector<double> grid = c.regrid_grid;
      if (c.regrid_step > 0.0) {
        const double t0 = s.times.front(), t1 = s.times.back();
        const auto n = static_cast<std::size_t>(std::floor((t1 - t0) / c.regrid_step + 1e-9));
        for (std::size_t i = 0; i <= n; ++i) grid.push_back(t0 + static_cast<double>(i) * c.regrid_step);
      }
      if (!grid.empty() || c.regrid_window > 0) {
        if (grid.empty()) grid = s.times;
        s = transport::regrid_series(s, grid, c.regrid_window);
      }
      io::write_series(ws.path(files::series), s);
      ws.series = s;
      const auto d = geometry::pairwise_distances(*ws.partition);
      TransitionMatrix a = transport::match_series(s, d);
      ws.stages.push_back({{"stage", "matching"}, {"kind", "ot"}, {"time_points", s.size()},
                           {"regrid_window", c.regrid_window}});
      if (c.gamma) {
        a = chain::smooth_kernel(a, d, *c.gamma);
        ws.stages.push_back({{"stage", "smoothing"}, {"gamma", *c.gamma}});
      }
      a = chain::apply_damping(a, c.epsilon);
      ws.stages.push_back({{"stage", "damping"}, {"epsilon", c.epsilon}});
      ws.a = std::move(a);
    });
  } else {
    in_stage("events", [&] {
      ensure_labels(ws);
      ws.events = chain::extract_events(*ws.labels, c.events);
      ws.stages.push_back({{"stage", "events"}, {"count", ws.events->events.size()},
                           {"time_step", c.events.time_step}, {"bridge_gaps", c.events.bridge_gaps}});
      if (c.resetting != chain::ResetMode::none) {
        ws.events = chain::apply_resetting(*ws.events, *ws.labels, c.resetting);
        ws.stages.push_back({{"stage", "resetting"},
                             {"mode", c.resetting == chain::ResetMode::loop ? "loop" : "dummy"},
                             {"states", ws.events->states}});
      }
      io::write_events(ws.path(files::events), *ws.events);
    });
    in_stage("estimation", [&] {
      TransitionMatrix a = c.estimator == PipelineConfig::Estimator::weighted
                               ? chain::estimate_weighted(*ws.events, c.eta)
                               : chain::estimate_relative_frequency(*ws.events);
      Json entry{{"stage", "estimation"},
                 {"kind", c.estimator == PipelineConfig::Estimator::weighted ? "weighted" : "relative"}};
      if (c.estimator == PipelineConfig::Estimator::weighted) entry["eta"] = c.eta;
      ws.stages.push_back(std::move(entry));
      ws.a = std::move(a);
    });
    if (c.gamma)
      in_stage("smoothing", [&] {
        ensure_partition(ws);
        ws.a = chain::smooth_kernel(*ws.a, geometry::pairwise_distances(*ws.partition), *c.gamma);
        ws.stages.push_back({{"stage", "smoothing"}, {"gamma", *c.gamma}});
      });
    in_stage("damping", [&] {
      ws.a = chain::apply_damping(*ws.a, c.epsilon);
      ws.stages.push_back({{"stage", "damping"}, {"epsilon", c.epsilon}});
    });
  }
  in_stage("stationary", [&] {
    ws.stationary = chain::stationary(*ws.a);
    io::write_transition(ws.path(files::transition), *ws.a);
    io::write_json(ws.path(files::transition_json), io::to_json(*ws.a));
    io::write_distribution(ws.path(files::stationary), *ws.stationary);
  });
}

void stage_control(Workspace& ws) {
  const auto& c = ws.config;
  if (!c.control_enabled) return;
  in_stage("control", [&] {
    ensure_transition(ws);
    ensure_partition(ws);
    const std::size_t k = ws.a->size();
    const std::size_t extra = dummy_states(ws);
    if (ws.partition->states() + extra != k)
      throw Error(ErrorCode::dimension_mismatch, "transition matrix and partition disagree on the state count");
    ws.reward = c.reward.resolve(ws.partition->centers(), extra);

    control::ControlConfig cc = c.control;
    if (c.finite_horizon) {
      std::size_t tau = c.tau;
      if (tau == 0) {
        if (c.input != PipelineConfig::Input::distribution_series)
          throw Error(ErrorCode::schema_error, "control.horizon.tau is required for this input");
        ensure_series(ws);
        tau = ws.series->size();
      }
      cc.horizon = control::Horizon::finite(tau, resolve_initial(ws, c.horizon_initial, k));
    }
    ws.plan = control::greedy_optimize(*ws.a, ws.reward, cc);
    ws.control = cc;

    io::CsvTable rt;
    rt.header = {"state", "reward"};
    for (std::size_t i = 0; i < k; ++i) rt.rows.push_back({std::to_string(i + 1), io::format_number(ws.reward(idx(i)))});
    io::write_csv(ws.path(files::reward), rt);
    io::write_control_plan(ws.path(files::control_plan), *ws.plan);
    io::write_json(ws.path(files::control_summary), io::control_summary(*ws.plan, cc));
    const TransitionMatrix controlled = control::controlled_matrix(*ws.a, ws.plan->delta);
    io::write_transition(ws.path(files::controlled_transition), controlled);
    io::write_distribution(ws.path(files::controlled_distribution),
                           control::controlled_distribution(*ws.a, ws.plan->delta, cc.horizon));
    ws.stages.push_back({{"stage", "control"},
                         {"lambda1", cc.lambda1},
                         {"lambda2", cc.lambda2},
                         {"H", cc.suppression_levels},
                         {"horizon", c.finite_horizon ? "finite" : "stationary"},
                         {"interventions", ws.plan->interventions.size()},
                         {"objective", ws.plan->objective_trace.back()}});
  });
}

void stage_evolve(Workspace& ws) {
  in_stage("simulation", [&] {
    ensure_transition(ws);
    const std::size_t k = ws.a->size();
    const Distribution z0(resolve_initial(ws, ws.config.evolve_initial, k));
    io::write_series(ws.path(files::evolution), chain::evolve(*ws.a, z0, ws.config.evolve_steps));
    Matrix delta;
    if (ws.plan) {
      delta = ws.plan->delta;
    } else if (fs::exists(ws.path(files::controlled_transition))) {
      delta = io::read_transition(ws.path(files::controlled_transition)).matrix() - ws.a->matrix();
    }
    Json entry{{"stage", "simulation"}, {"steps", ws.config.evolve_steps}};
    if (delta.size() > 0) {
      io::write_series(ws.path(files::controlled_evolution),
                       control::simulate_controlled(*ws.a, delta, z0, ws.config.evolve_steps));
      entry["controlled"] = true;
    }
    ws.stages.push_back(std::move(entry));
  });
}

Json write_summary(const Workspace& ws) {
  Json s{{"schema_version", io::kSchemaVersion}, {"config", ws.config.source}};
  Json order = Json::array();
  for (const auto& st : ws.stages) order.push_back(st.at("stage"));
  s["stage_order"] = std::move(order);
  s["stages"] = ws.stages;
  if (ws.a) s["states"] = ws.a->size();
  if (ws.labels && ws.stationary && ws.labels->states() == ws.stationary->size())
    s["stationary_l1_to_empirical"] = (ws.labels->histogram() - ws.stationary->vector()).lpNorm<1>();
  if (ws.plan) {
    s["objective_trace"] = ws.plan->objective_trace;
    s["interventions"] = ws.plan->interventions.size();
  }
  s["warnings"] = ws.warnings;
  io::write_json(ws.path(files::summary), s);
  return s;
}

Json run_pipeline(const PipelineConfig& config) {
  Workspace ws(config);
  stage_input(ws);
  stage_discretize(ws);
  stage_estimate(ws);
  stage_control(ws);
  stage_evolve(ws);
  in_stage("report", [&] { report::emit_report(ws.config.output_dir); });
  return in_stage("summary", [&] { return write_summary(ws); });
}

}  // namespace mcsc::pipeline
