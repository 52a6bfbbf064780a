#pragma once

// Transition matrices from independent-measures snapshots via exact optimal
// transport between consecutive distributions.

#include <span>
#include <vector>

#include "mcsc/geometry.hpp"
#include "mcsc/types.hpp"

namespace mcsc::transport {

struct TransportPlan {
  Matrix flow;  // flow(i, j): mass moved from state i to state j
  double cost = 0.0;
};

// Exact minimum-cost plan (transportation simplex on a spanning-tree basis).
// Throws infeasible_marginals when the total masses differ by more than 1e-9.
TransportPlan solve_ot(const Distribution& src, const Distribution& dst,
                       const geometry::DistanceMatrix& d);

// Same solver over raw nonnegative marginals and an arbitrary cost matrix.
TransportPlan solve_transportation(const Vector& supply, const Vector& demand, const Matrix& cost);

// Entrywise mean of the plans.
Matrix average_plan(std::span<const TransportPlan> plans);

// Rows of the averaged plan normalized and transposed into columns; rows with
// no outflow become self-transitions.
TransitionMatrix plan_to_transition(const Matrix& mean_flow);

// Linear interpolation onto `grid`, centered moving average of width
// 2 * smooth_window + 1 (truncated at the ends), then renormalization.
DistributionSeries regrid_series(const DistributionSeries& series, std::span<const double> grid,
                                 std::size_t smooth_window);

TransitionMatrix match_series(const DistributionSeries& series, const geometry::DistanceMatrix& d);

// L1 distance between evolve(A, z(1), t) and z(1 + t) for t = 1..T-1.
std::vector<double> free_run_discrepancy(const TransitionMatrix& a, const DistributionSeries& series);

}  // namespace mcsc::transport
