#include "mcsc/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mcsc/chain.hpp"
#include "mcsc/error.hpp"

namespace mcsc::transport {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

struct Cell {
  std::size_t row;
  std::size_t col;
  double flow;
};

// Transportation simplex over the positive-mass rows/columns. Nodes 0..m-1 are
// rows, m..m+n-1 columns; the m+n-1 basic cells form a spanning tree.
class TransportationSimplex {
 public:
  TransportationSimplex(std::vector<double> supply, std::vector<double> demand, Matrix cost)
      : m_(supply.size()), n_(demand.size()), cost_(std::move(cost)) {
    initial_basis(std::move(supply), std::move(demand));
    double scale = 0.0;
    for (Eigen::Index i = 0; i < cost_.size(); ++i) scale = std::max(scale, std::abs(cost_.data()[i]));
    tol_ = 1e-12 * (1.0 + scale);
  }

  void run() {
    const std::size_t cap = 50 * (m_ + n_) * (m_ + n_) + 1000;
    for (std::size_t it = 0; it < cap; ++it) {
      compute_potentials();
      std::size_t ei = 0, ej = 0;
      double best = -tol_;
      for (std::size_t j = 0; j < n_; ++j)
        for (std::size_t i = 0; i < m_; ++i) {
          const double r = cost_(idx(i), idx(j)) - u_[i] - v_[j];
          if (r < best) {
            best = r;
            ei = i;
            ej = j;
          }
        }
      if (best == -tol_) return;
      pivot(ei, ej);
    }
    throw Error(ErrorCode::no_convergence, "transportation simplex exceeded its pivot limit");
  }

  const std::vector<Cell>& basis() const { return basis_; }

 private:
  void initial_basis(std::vector<double> s, std::vector<double> t) {
    // Northwest corner; ties advance the column so the basis stays a tree.
    std::size_t i = 0, j = 0;
    while (true) {
      const double q = std::max(0.0, std::min(s[i], t[j]));
      basis_.push_back({i, j, q});
      s[i] -= q;
      t[j] -= q;
      if (i == m_ - 1 && j == n_ - 1) break;
      if (i == m_ - 1) ++j;
      else if (j == n_ - 1) ++i;
      else if (s[i] < t[j]) ++i;
      else ++j;
    }
  }

  void build_adjacency() {
    adj_.assign(m_ + n_, {});
    for (std::size_t b = 0; b < basis_.size(); ++b) {
      adj_[basis_[b].row].push_back(b);
      adj_[m_ + basis_[b].col].push_back(b);
    }
  }

  void compute_potentials() {
    build_adjacency();
    u_.assign(m_, 0.0);
    v_.assign(n_, 0.0);
    std::vector<char> seen(m_ + n_, 0);
    std::vector<std::size_t> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t b : adj_[node]) {
        const Cell& c = basis_[b];
        const double cij = cost_(idx(c.row), idx(c.col));
        const std::size_t other = node < m_ ? m_ + c.col : c.row;
        if (seen[other]) continue;
        seen[other] = 1;
        if (node < m_) v_[c.col] = cij - u_[c.row];
        else u_[c.row] = cij - v_[c.col];
        stack.push_back(other);
      }
    }
  }

  void pivot(std::size_t ei, std::size_t ej) {
    // Tree path from row node ei to column node ej.
    const std::size_t start = ei, goal = m_ + ej;
    std::vector<std::size_t> parent_cell(m_ + n_, basis_.size());
    std::vector<char> seen(m_ + n_, 0);
    std::vector<std::size_t> stack{start};
    seen[start] = 1;
    while (!stack.empty() && !seen[goal]) {
      const std::size_t node = stack.back();
      stack.pop_back();
      for (std::size_t b : adj_[node]) {
        const Cell& c = basis_[b];
        const std::size_t other = node < m_ ? m_ + c.col : c.row;
        if (seen[other]) continue;
        seen[other] = 1;
        parent_cell[other] = b;
        stack.push_back(other);
      }
    }
    // Walk back from the column end: cells alternate -, +, -, ...
    std::vector<std::size_t> path;
    for (std::size_t node = goal; node != start;) {
      const std::size_t b = parent_cell[node];
      path.push_back(b);
      const Cell& c = basis_[b];
      node = node < m_ ? m_ + c.col : c.row;
    }
    double theta = std::numeric_limits<double>::infinity();
    std::size_t leave = path.front();
    for (std::size_t p = 0; p < path.size(); p += 2) {
      if (basis_[path[p]].flow < theta) {
        theta = basis_[path[p]].flow;
        leave = path[p];
      }
    }
    for (std::size_t p = 0; p < path.size(); ++p) {
      double& f = basis_[path[p]].flow;
      f = p % 2 == 0 ? std::max(0.0, f - theta) : f + theta;
    }
    basis_[leave] = {ei, ej, theta};
  }

  std::size_t m_, n_;
  Matrix cost_;
  double tol_ = 0.0;
  std::vector<Cell> basis_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<double> u_, v_;
};

}  // namespace

TransportPlan solve_transportation(const Vector& supply, const Vector& demand, const Matrix& cost) {
  if (cost.rows() != supply.size() || cost.cols() != demand.size())
    throw Error(ErrorCode::dimension_mismatch, "cost matrix shape does not match the marginals");
  double s_total = 0.0, d_total = 0.0;
  for (Eigen::Index i = 0; i < supply.size(); ++i) {
    if (!(supply(i) >= 0.0) || !std::isfinite(supply(i)))
      throw Error(ErrorCode::infeasible_marginals, "supply entries must be finite and nonnegative");
    s_total += supply(i);
  }
  for (Eigen::Index j = 0; j < demand.size(); ++j) {
    if (!(demand(j) >= 0.0) || !std::isfinite(demand(j)))
      throw Error(ErrorCode::infeasible_marginals, "demand entries must be finite and nonnegative");
    d_total += demand(j);
  }
  if (std::abs(s_total - d_total) > 1e-9)
    throw Error(ErrorCode::infeasible_marginals,
                "marginal masses differ: " + std::to_string(s_total) + " vs " + std::to_string(d_total));

  TransportPlan plan;
  plan.flow = Matrix::Zero(cost.rows(), cost.cols());
  std::vector<std::size_t> rows, cols;
  for (Eigen::Index i = 0; i < supply.size(); ++i)
    if (supply(i) > 0.0) rows.push_back(static_cast<std::size_t>(i));
  for (Eigen::Index j = 0; j < demand.size(); ++j)
    if (demand(j) > 0.0) cols.push_back(static_cast<std::size_t>(j));
  if (rows.empty() || cols.empty()) return plan;

  std::vector<double> s(rows.size()), t(cols.size());
  Matrix c(idx(rows.size()), idx(cols.size()));
  for (std::size_t a = 0; a < rows.size(); ++a) s[a] = supply(idx(rows[a]));
  for (std::size_t b = 0; b < cols.size(); ++b) t[b] = demand(idx(cols[b]));
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) c(idx(a), idx(b)) = cost(idx(rows[a]), idx(cols[b]));

  TransportationSimplex simplex(std::move(s), std::move(t), std::move(c));
  simplex.run();
  for (const auto& cell : simplex.basis()) {
    const auto i = idx(rows[cell.row]);
    const auto j = idx(cols[cell.col]);
    plan.flow(i, j) = cell.flow;
    plan.cost += cell.flow * cost(i, j);
  }
  return plan;
}

TransportPlan solve_ot(const Distribution& src, const Distribution& dst, const geometry::DistanceMatrix& d) {
  if (src.size() != dst.size() || src.size() != d.size())
    throw Error(ErrorCode::dimension_mismatch, "marginals and distance matrix must share K");
  return solve_transportation(src.vector(), dst.vector(), d.matrix());
}

Matrix average_plan(std::span<const TransportPlan> plans) {
  if (plans.empty()) throw Error(ErrorCode::invalid_argument, "cannot average an empty list of plans");
  Matrix mean = Matrix::Zero(plans.front().flow.rows(), plans.front().flow.cols());
  for (const auto& p : plans) {
    if (p.flow.rows() != mean.rows() || p.flow.cols() != mean.cols())
      throw Error(ErrorCode::dimension_mismatch, "plans differ in shape");
    mean += p.flow;
  }
  return mean / static_cast<double>(plans.size());
}

TransitionMatrix plan_to_transition(const Matrix& mean_flow) {
  if (mean_flow.rows() != mean_flow.cols() || mean_flow.rows() == 0)
    throw Error(ErrorCode::dimension_mismatch, "plan must be square");
  const auto k = mean_flow.rows();
  Matrix a = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    double out = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      if (!(mean_flow(i, j) >= 0.0)) throw Error(ErrorCode::invalid_argument, "plan entries must be nonnegative");
      out += mean_flow(i, j);
    }
    if (out > 0.0) {
      for (Eigen::Index j = 0; j < k; ++j) a(j, i) = mean_flow(i, j) / out;
    } else {
      a(i, i) = 1.0;
    }
  }
  return TransitionMatrix(std::move(a));
}

DistributionSeries regrid_series(const DistributionSeries& series, std::span<const double> grid,
                                 std::size_t smooth_window) {
  series.validate();
  if (series.size() == 0) throw Error(ErrorCode::insufficient_data, "empty distribution series");
  if (grid.empty()) throw Error(ErrorCode::invalid_argument, "empty grid");
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (!(grid[g] > grid[g - 1])) throw Error(ErrorCode::invalid_argument, "grid must strictly increase");
  const double t0 = series.times.front();
  const double t1 = series.times.back();
  if (grid.front() < t0 || grid.back() > t1)
    throw Error(ErrorCode::invalid_argument, "grid extends outside the observed time range");

  const auto k = idx(series.states());
  std::vector<Vector> interp;
  interp.reserve(grid.size());
  for (double t : grid) {
    const auto it = std::upper_bound(series.times.begin(), series.times.end(), t);
    auto hi = static_cast<std::size_t>(it - series.times.begin());
    if (hi >= series.size()) {
      interp.push_back(series.points.back().vector());
      continue;
    }
    const std::size_t lo = hi - 1;
    const double w = (t - series.times[lo]) / (series.times[hi] - series.times[lo]);
    interp.push_back((1.0 - w) * series.points[lo].vector() + w * series.points[hi].vector());
  }

  DistributionSeries out;
  out.times.assign(grid.begin(), grid.end());
  const std::size_t n = grid.size();
  for (std::size_t g = 0; g < n; ++g) {
    const std::size_t lo = g >= smooth_window ? g - smooth_window : 0;
    const std::size_t hi = std::min(n - 1, g + smooth_window);
    Vector acc = Vector::Zero(k);
    for (std::size_t h = lo; h <= hi; ++h) acc += interp[h];
    out.points.push_back(Distribution::normalized(acc / static_cast<double>(hi - lo + 1)));
  }
  return out;
}

TransitionMatrix match_series(const DistributionSeries& series, const geometry::DistanceMatrix& d) {
  series.validate();
  if (series.size() < 2) throw Error(ErrorCode::insufficient_data, "matching needs at least two time points");
  std::vector<TransportPlan> plans;
  plans.reserve(series.size() - 1);
  for (std::size_t t = 0; t + 1 < series.size(); ++t)
    plans.push_back(solve_ot(series.points[t], series.points[t + 1], d));
  return plan_to_transition(average_plan(plans));
}

std::vector<double> free_run_discrepancy(const TransitionMatrix& a, const DistributionSeries& series) {
  if (series.size() == 0) return {};
  const auto run = chain::evolve(a, series.points.front(), series.size() - 1);
  std::vector<double> out;
  for (std::size_t t = 1; t < series.size(); ++t)
    out.push_back((run.points[t].vector() - series.points[t].vector()).lpNorm<1>());
  return out;
}

}  // namespace mcsc::transport
