#pragma once

// Plot-ready long-format CSVs built from the artifacts of a finished run.

#include <filesystem>
#include <vector>

namespace mcsc::report {

namespace fs = std::filesystem;

inline constexpr const char* kDistributions = "report_distributions.csv";
inline constexpr const char* kInterventions = "report_interventions.csv";
inline constexpr const char* kGroups = "report_groups.csv";

// Reads partition.json, stationary.csv and, when present, labels.csv,
// observed_series.csv, controlled_distribution.csv and control_plan.csv from
// dir. Returns the files written.
std::vector<fs::path> emit_report(const fs::path& dir);

}  // namespace mcsc::report
