#pragma once

// End-to-end runs driven by a JSON config: simulate or ingest, discretize,
// estimate, control, evolve, and write every artifact to an output directory.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mcsc/chain.hpp"
#include "mcsc/control.hpp"
#include "mcsc/error.hpp"
#include "mcsc/geometry.hpp"
#include "mcsc/io.hpp"
#include "mcsc/models.hpp"

namespace mcsc::pipeline {

namespace fs = std::filesystem;
using io::Json;

// An Error tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct AxisCondition {
  std::size_t axis = 0;  // 0-based
  std::string op;        // <, <=, >, >=, ==, !=
  double value = 0.0;
  bool holds(std::span<const double> point) const;
};

struct RewardRule {
  std::vector<AxisCondition> when;  // conjunction; empty matches everything
  double value = 0.0;
};

struct RewardSpec {
  enum class Kind { values, rules, states };
  Kind kind = Kind::values;
  std::vector<double> values;
  std::vector<RewardRule> rules;  // first match wins
  double fallback = 0.0;
  std::vector<int> states;  // 1-based
  double inside = 1.0;
  double outside = -1.0;

  // centers: one point per partition cell. extra_states (dummy reset state)
  // get the fallback value.
  Vector resolve(const PointSet& centers, std::size_t extra_states = 0) const;
  static RewardSpec from_json(const Json& doc);
};

// Where a finite horizon or a simulation starts.
struct InitialSpec {
  enum class Kind { first_observations, uniform, stationary, explicit_values };
  Kind kind = Kind::first_observations;
  std::vector<double> values;
  static InitialSpec from_json(const Json& doc);
};

struct PipelineConfig {
  enum class Input { model, csv, distribution_series };
  enum class PartitionKind { per_axis, kmeans, sample, file };
  enum class Estimator { relative, weighted };

  std::uint64_t seed = 0;
  Input input = Input::model;
  models::SimConfig model;
  fs::path csv_path;
  io::CsvMapping csv;
  fs::path series_path;
  fs::path representatives_path;  // state coordinates for series input

  PartitionKind partition = PartitionKind::per_axis;
  std::vector<std::size_t> bins{20};
  geometry::EdgeRule edge_rule = geometry::EdgeRule::quantile;
  std::size_t clusters = 0;
  std::uint64_t partition_seed = 0;
  std::size_t kmeans_max_iterations = 300;
  fs::path partition_path;

  Estimator estimator = Estimator::relative;
  double eta = 1.0;
  std::optional<double> gamma;
  double epsilon = 1e-10;
  chain::ResetMode resetting = chain::ResetMode::none;
  chain::EventOptions events;

  std::vector<double> regrid_grid;  // empty: keep the observed times
  double regrid_step = 0.0;         // > 0: uniform grid from first to last time
  std::size_t regrid_window = 0;

  bool control_enabled = true;
  control::ControlConfig control;
  RewardSpec reward;
  bool finite_horizon = false;
  std::size_t tau = 0;  // 0: observed horizon length for series input
  InitialSpec horizon_initial;

  std::size_t evolve_steps = 100;
  InitialSpec evolve_initial;

  fs::path output_dir = "mcsc_out";
  Json source;  // the document this config was parsed from, echoed into the summary

  static PipelineConfig from_json(const Json& doc);
};

PipelineConfig load_config(const fs::path& path);

// Overrides applied to the raw JSON before parsing. A seed override replaces
// every seed in the document.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda1;
  std::optional<double> lambda2;
  std::optional<fs::path> output_dir;
};
void apply_overrides(Json& doc, const Overrides& overrides);

// Fixed artifact names inside the output directory.
namespace files {
inline constexpr const char* trajectories = "trajectories.csv";
inline constexpr const char* partition = "partition.json";
inline constexpr const char* labels = "labels.csv";
inline constexpr const char* events = "events.csv";
inline constexpr const char* transition = "transition.csv";
inline constexpr const char* transition_json = "transition.json";
inline constexpr const char* stationary = "stationary.csv";
inline constexpr const char* series = "observed_series.csv";
inline constexpr const char* reward = "reward.csv";
inline constexpr const char* control_plan = "control_plan.csv";
inline constexpr const char* control_summary = "control.json";
inline constexpr const char* controlled_transition = "controlled_transition.csv";
inline constexpr const char* controlled_distribution = "controlled_distribution.csv";
inline constexpr const char* evolution = "evolution.csv";
inline constexpr const char* controlled_evolution = "controlled_evolution.csv";
inline constexpr const char* summary = "summary.json";
}  // namespace files

// Everything a run produces. Stages fill it in order; standalone stages load
// the missing pieces from the output directory.
struct Workspace {
  PipelineConfig config;
  std::vector<models::Trajectory> trajectories;
  std::optional<geometry::Partition> partition;
  std::optional<chain::LabeledSeries> labels;
  std::optional<chain::EventSet> events;
  std::optional<DistributionSeries> series;
  std::optional<TransitionMatrix> a;
  std::optional<Distribution> stationary;
  Vector reward;
  std::optional<control::ControlConfig> control;
  std::optional<control::ControlPlan> plan;
  Json stages = Json::array();
  std::vector<std::string> warnings;

  explicit Workspace(PipelineConfig c) : config(std::move(c)) {}
  fs::path path(const char* name) const { return config.output_dir / name; }
};

// Each stage writes its own artifacts; errors come out as StageError.
void stage_input(Workspace& ws);       // simulate or ingest
void stage_discretize(Workspace& ws);  // partition + labels
void stage_estimate(Workspace& ws);    // events, resetting, A, smoothing, damping
void stage_control(Workspace& ws);     // reward + greedy plan
void stage_evolve(Workspace& ws);      // uncontrolled and controlled z(t)
Json write_summary(const Workspace& ws);

// All stages in order, plus the report files.
Json run_pipeline(const PipelineConfig& config);

}  // namespace mcsc::pipeline
