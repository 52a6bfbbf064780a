#pragma once

// Brute-force references used by the unit tests and the acceptance suite.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mcsc/control.hpp"
#include "mcsc/types.hpp"

namespace oracle {

using mcsc::Matrix;
using mcsc::Vector;

struct TransportOptimum {
  double cost = std::numeric_limits<double>::infinity();
  Matrix flow;
  std::size_t trees = 0;     // spanning trees of K_{m,n}
  std::size_t vertices = 0;  // feasible basic solutions among them
};

// Minimum of the transportation LP by visiting every basic solution: each
// spanning tree of the complete bipartite graph K_{m,n} fixes a unique flow,
// obtained here by peeling leaves. Feasible trees are the polytope vertices.
inline TransportOptimum transportation_by_vertices(const Vector& supply, const Vector& demand,
                                                   const Matrix& cost) {
  const std::size_t m = static_cast<std::size_t>(supply.size());
  const std::size_t n = static_cast<std::size_t>(demand.size());
  const std::size_t edges = m * n;
  const std::size_t basis = m + n - 1;
  TransportOptimum best;
  std::vector<std::size_t> pick(basis);
  for (std::size_t i = 0; i < basis; ++i) pick[i] = i;

  while (true) {
    // Leaf peeling; fails if the chosen edges contain a cycle.
    std::vector<double> rest(m + n);
    for (std::size_t i = 0; i < m; ++i) rest[i] = supply(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < n; ++j) rest[m + j] = demand(static_cast<Eigen::Index>(j));
    std::vector<bool> used(basis, false);
    Matrix flow = Matrix::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    std::size_t assigned = 0;
    bool progress = true;
    while (assigned < basis && progress) {
      progress = false;
      for (std::size_t node = 0; node < m + n; ++node) {
        std::size_t degree = 0, last = 0;
        for (std::size_t e = 0; e < basis; ++e) {
          if (used[e]) continue;
          const std::size_t r = pick[e] / n, c = m + pick[e] % n;
          if (r == node || c == node) {
            ++degree;
            last = e;
          }
        }
        if (degree != 1) continue;
        const std::size_t r = pick[last] / n, c = pick[last] % n;
        const double v = rest[node];
        flow(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        rest[r] -= v;
        rest[m + c] -= v;
        used[last] = true;
        ++assigned;
        progress = true;
      }
    }
    if (assigned == basis) ++best.trees;
    if (assigned == basis && flow.minCoeff() >= -1e-12) {
      ++best.vertices;
      const double c = (flow.array() * cost.array()).sum();
      if (c < best.cost) {
        best.cost = c;
        best.flow = flow;
      }
    }
    // next combination
    std::size_t i = basis;
    while (i > 0 && pick[i - 1] == edges - basis + i - 1) --i;
    if (i == 0) break;
    ++pick[i - 1];
    for (std::size_t j = i; j < basis; ++j) pick[j] = pick[j - 1] + 1;
  }
  return best;
}

struct BestMove {
  double value = -std::numeric_limits<double>::infinity();
  mcsc::control::Site site;
  double h = 0.0;
  bool found = false;
};

inline Matrix single_suppression(const mcsc::TransitionMatrix& a, mcsc::control::Site site, double h) {
  Matrix delta = Matrix::Zero(a.matrix().rows(), a.matrix().cols());
  const double cut = h * a(site.to, site.from);
  delta(static_cast<Eigen::Index>(site.to), static_cast<Eigen::Index>(site.from)) -= cut;
  delta(static_cast<Eigen::Index>(site.from), static_cast<Eigen::Index>(site.from)) += cut;
  return delta;
}

// G without the L0 term, from the full objective.
inline double smooth_objective(const mcsc::TransitionMatrix& a, const Matrix& delta, const Vector& reward,
                               const mcsc::control::ControlConfig& config) {
  const auto t = mcsc::control::objective_terms(a, delta, reward, config);
  return t.reward - config.lambda2 * t.log_fold;
}

// Best first move over every off-diagonal site with a positive entry and every
// level in H, scored by the full objective. With `screened`, sites whose
// probe suppression lowers G without the L0 term are skipped first, as the
// greedy search does. Ties: larger G, then smaller h, then (from, to).
inline BestMove best_single_move(const mcsc::TransitionMatrix& a, const Vector& reward,
                                 const mcsc::control::ControlConfig& config, bool screened) {
  BestMove best;
  const std::size_t k = a.size();
  const double base = smooth_objective(a, Matrix::Zero(a.matrix().rows(), a.matrix().cols()), reward, config);
  std::vector<double> levels = config.suppression_levels;
  std::sort(levels.begin(), levels.end());
  for (std::size_t from = 0; from < k; ++from)
    for (std::size_t to = 0; to < k; ++to) {
      if (from == to || a(to, from) <= 0.0) continue;
      if (screened &&
          smooth_objective(a, single_suppression(a, {from, to}, config.probe_suppression), reward, config) < base)
        continue;
      for (double h : levels) {
        const double g = mcsc::control::objective(a, single_suppression(a, {from, to}, h), reward, config);
        if (!best.found || g > best.value || (g == best.value && h < best.h)) best = {g, {from, to}, h, true};
      }
    }
  return best;
}

}  // namespace oracle
