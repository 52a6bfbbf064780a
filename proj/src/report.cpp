#include "mcsc/report.hpp"

#include <map>
#include <string>

#include "mcsc/error.hpp"
#include "mcsc/io.hpp"
#include "mcsc/pipeline.hpp"

namespace mcsc::report {
namespace {

namespace files = pipeline::files;

// Coordinates of state i (0-based), blank for states outside the partition.
std::vector<std::string> coords(const PointSet& centers, std::size_t i) {
  std::vector<std::string> out;
  for (std::size_t d = 0; d < centers.dim(); ++d)
    out.push_back(i < centers.size() ? io::format_number(centers[i][d]) : "");
  return out;
}

}  // namespace

std::vector<fs::path> emit_report(const fs::path& dir) {
  const auto partition = io::partition_from_json(io::read_json(dir / files::partition));
  const PointSet centers = partition.centers();
  const Distribution predicted = io::read_distribution(dir / files::stationary);
  const std::size_t k = predicted.size();

  std::optional<chain::LabeledSeries> labels;
  if (fs::exists(dir / files::labels)) labels = io::read_labels(dir / files::labels, partition.states());

  Vector empirical;
  bool have_empirical = false;
  if (labels) {
    empirical = labels->histogram();
    have_empirical = true;
  } else if (fs::exists(dir / files::series)) {
    const auto s = io::read_series(dir / files::series);
    empirical = Vector::Zero(static_cast<Eigen::Index>(s.states()));
    for (const auto& z : s.points) empirical += z.vector();
    empirical /= static_cast<double>(s.size());
    have_empirical = true;
  }
  std::optional<Distribution> controlled;
  if (fs::exists(dir / files::controlled_distribution))
    controlled = io::read_distribution(dir / files::controlled_distribution);

  std::vector<fs::path> written;

  io::CsvTable dist;
  dist.header = {"state"};
  for (std::size_t d = 1; d <= centers.dim(); ++d) dist.header.push_back("x_" + std::to_string(d));
  for (const char* c : {"empirical", "predicted", "controlled"}) dist.header.push_back(c);
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<std::string> row{std::to_string(i + 1)};
    for (auto& c : coords(centers, i)) row.push_back(std::move(c));
    const auto e = static_cast<Eigen::Index>(i);
    row.push_back(have_empirical && e < empirical.size() ? io::format_number(empirical(e)) : "");
    row.push_back(io::format_number(predicted[i]));
    row.push_back(io::format_number(controlled ? (*controlled)[i] : predicted[i]));
    dist.rows.push_back(std::move(row));
  }
  written.push_back(dir / kDistributions);
  io::write_csv(written.back(), dist);

  io::CsvTable arrows;
  arrows.header = {"from_state", "to_state"};
  for (std::size_t d = 1; d <= centers.dim(); ++d) arrows.header.push_back("from_x_" + std::to_string(d));
  for (std::size_t d = 1; d <= centers.dim(); ++d) arrows.header.push_back("to_x_" + std::to_string(d));
  for (const char* c : {"original_prob", "controlled_prob", "suppression"}) arrows.header.push_back(c);
  if (fs::exists(dir / files::control_plan))
    for (const auto& iv : io::read_control_plan(dir / files::control_plan)) {
      std::vector<std::string> row{std::to_string(iv.site.from + 1), std::to_string(iv.site.to + 1)};
      for (auto& c : coords(centers, iv.site.from)) row.push_back(std::move(c));
      for (auto& c : coords(centers, iv.site.to)) row.push_back(std::move(c));
      row.push_back(io::format_number(iv.original));
      row.push_back(io::format_number(iv.controlled));
      row.push_back(io::format_number(iv.cumulative_suppression));
      arrows.rows.push_back(std::move(row));
    }
  written.push_back(dir / kInterventions);
  io::write_csv(written.back(), arrows);

  // Distribution of states within each observation time (e.g. age group).
  io::CsvTable groups;
  groups.header = {"time", "state", "count", "fraction"};
  if (labels) {
    std::map<std::int64_t, std::vector<std::size_t>> by_time;
    for (const auto& r : labels->records()) {
      auto& counts = by_time[r.time];
      counts.resize(partition.states(), 0);
      ++counts[static_cast<std::size_t>(r.label - 1)];
    }
    for (const auto& [t, counts] : by_time) {
      std::size_t total = 0;
      for (auto c : counts) total += c;
      for (std::size_t i = 0; i < counts.size(); ++i)
        if (counts[i] > 0)
          groups.rows.push_back({std::to_string(t), std::to_string(i + 1), std::to_string(counts[i]),
                                 io::format_number(static_cast<double>(counts[i]) / static_cast<double>(total))});
    }
  } else if (fs::exists(dir / files::series)) {
    const auto s = io::read_series(dir / files::series);
    for (std::size_t n = 0; n < s.size(); ++n)
      for (std::size_t i = 0; i < s.states(); ++i)
        if (s.points[n][i] > 0.0)
          groups.rows.push_back({io::format_number(s.times[n]), std::to_string(i + 1), "",
                                 io::format_number(s.points[n][i])});
  }
  written.push_back(dir / kGroups);
  io::write_csv(written.back(), groups);
  return written;
}

}  // namespace mcsc::report
