#pragma once

// File formats: CSV tables for trajectories, labels, events, matrices,
// distributions and control plans; JSON for partitions and summaries.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "mcsc/chain.hpp"
#include "mcsc/control.hpp"
#include "mcsc/geometry.hpp"
#include "mcsc/models.hpp"
#include "mcsc/transport.hpp"
#include "mcsc/types.hpp"

namespace mcsc::io {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

inline constexpr int kSchemaVersion = 1;

// Shortest text that parses back to the same double.
std::string format_number(double v);
double parse_number(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column position by name; throws schema_error when absent.
  std::size_t column(const std::string& name) const;
};

// RFC 4180 subset: comma delimiter, double-quoted fields, CRLF or LF.
CsvTable parse_csv(std::istream& in);
CsvTable read_csv(const fs::path& path);
void write_csv(const fs::path& path, const CsvTable& table);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);
Json read_json(const fs::path& path);
void write_json(const fs::path& path, const Json& doc);

// individual_id,t,x_1..x_N
void write_trajectories(const fs::path& path, const std::vector<models::Trajectory>& trajectories);
std::vector<models::Trajectory> read_trajectories(const fs::path& path);

// individual_id,t,state
void write_labels(const fs::path& path, const chain::LabeledSeries& series);
chain::LabeledSeries read_labels(const fs::path& path, std::size_t states);

// m,t,i,j with 1-based states.
void write_events(const fs::path& path, const chain::EventSet& events);
chain::EventSet read_events(const fs::path& path, std::size_t states);

// Dense, row-major, header row of state labels.
void write_matrix(const fs::path& path, const Matrix& m);
Matrix read_matrix(const fs::path& path);
inline void write_transition(const fs::path& path, const TransitionMatrix& a) {
  write_matrix(path, a.matrix());
}
TransitionMatrix read_transition(const fs::path& path);

Json to_json(const TransitionMatrix& a);
TransitionMatrix transition_from_json(const Json& doc);
Json to_json(const Distribution& z);
Distribution distribution_from_json(const Json& doc);

// One row: header of state labels, then the probabilities.
void write_distribution(const fs::path& path, const Distribution& z);
Distribution read_distribution(const fs::path& path);

// time,z_1..z_K
void write_series(const fs::path& path, const DistributionSeries& series);
DistributionSeries read_series(const fs::path& path);

void write_transport_plan(const fs::path& path, const transport::TransportPlan& plan);

// from_state,to_state,original_prob,controlled_prob,cumulative_suppression
void write_control_plan(const fs::path& path, const control::ControlPlan& plan);
std::vector<control::Intervention> read_control_plan(const fs::path& path);
Json control_summary(const control::ControlPlan& plan, const control::ControlConfig& config);

// {kind, edges | representatives, distance}
Json to_json(const geometry::Partition& partition);
geometry::Partition partition_from_json(const Json& doc);

// Plain x_1..x_N table, one row per point.
PointSet read_points(const fs::path& path);

struct CsvMapping {
  std::string individual = "individual_id";
  std::string time = "t";
  std::vector<std::string> variables;
  std::vector<std::string> categorical;  // subset of variables coded as numbers
  double malformed_tolerance = 0.0;      // fraction of rows allowed to be unparseable
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_dropped_missing = 0;
  std::size_t rows_malformed = 0;
  std::vector<std::size_t> missing_per_variable;
  std::vector<std::string> warnings;
};

struct Ingested {
  std::vector<models::Trajectory> trajectories;  // individuals in first-seen order, time-sorted
  IngestReport report;
};

// Rows with an empty or NA variable are dropped and counted per variable.
// Duplicate (individual, time) pairs are a hard error.
Ingested ingest_csv(const fs::path& path, const CsvMapping& mapping);

}  // namespace mcsc::io
