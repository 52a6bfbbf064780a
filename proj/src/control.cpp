#include "mcsc/control.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "mcsc/chain.hpp"
#include "mcsc/error.hpp"
#include "mcsc/simd/kernels.hpp"

namespace mcsc::control {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

constexpr double kEffectiveTolerance = 1e-10;

void check_shapes(const TransitionMatrix& a, const Matrix& delta) {
  const auto k = idx(a.size());
  if (delta.rows() != k || delta.cols() != k)
    throw Error(ErrorCode::dimension_mismatch, "control matrix shape differs from the transition matrix");
}

std::size_t count_nonzeros(const Matrix& delta) {
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < delta.size(); ++i)
    if (std::abs(delta.data()[i]) > kNonzeroThreshold) ++n;
  return n;
}

double log_fold(const Matrix& a, const Matrix& effective) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double orig = a.data()[i];
    if (orig == 0.0) continue;
    const double now = effective.data()[i];
    if (!(now > 0.0))
      throw Error(ErrorCode::log_divergence, "a transition with nonzero probability was driven to zero");
    s += std::abs(std::log(now / orig));
  }
  return s;
}

double log_term(double now, double orig) { return orig == 0.0 ? 0.0 : std::abs(std::log(now / orig)); }

// z(tau) for z(t+1) = P z(t), z(1) = initial.
Vector finite_horizon(const Matrix& p, const Vector& initial, std::size_t tau) {
  const std::size_t k = static_cast<std::size_t>(p.rows());
  const auto& kt = simd::active();
  Vector z = initial;
  Vector next(z.size());
  for (std::size_t t = 1; t < tau; ++t) {
    kt.matvec(p.data(), k, k, z.data(), next.data());
    z.swap(next);
  }
  return z;
}

Vector mean_occupancy(const Matrix& p, const Vector& initial, std::size_t tau) {
  const std::size_t k = static_cast<std::size_t>(p.rows());
  const auto& kt = simd::active();
  Vector z = initial;
  Vector acc = initial;
  Vector next(z.size());
  for (std::size_t t = 1; t < tau; ++t) {
    kt.matvec(p.data(), k, k, z.data(), next.data());
    z.swap(next);
    acc += z;
  }
  return acc / static_cast<double>(tau);
}

}  // namespace

void ControlConfig::validate(std::size_t states) const {
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0) || !std::isfinite(lambda1) || !std::isfinite(lambda2))
    throw Error(ErrorCode::invalid_argument, "lambda1 and lambda2 must be finite and nonnegative");
  if (suppression_levels.empty())
    throw Error(ErrorCode::invalid_argument, "the set of suppression levels must not be empty");
  for (double h : suppression_levels)
    if (!(h > 0.0 && h < 1.0)) throw Error(ErrorCode::invalid_argument, "suppression levels must lie in (0, 1)");
  if (!(candidate_fraction > 0.0 && candidate_fraction <= 1.0))
    throw Error(ErrorCode::invalid_argument, "candidate_fraction must lie in (0, 1]");
  if (!(probe_suppression > 0.0 && probe_suppression < 1.0))
    throw Error(ErrorCode::invalid_argument, "probe_suppression must lie in (0, 1)");
  if (horizon.kind == HorizonKind::finite) {
    if (horizon.tau < 1) throw Error(ErrorCode::invalid_argument, "finite horizon tau must be >= 1");
    if (static_cast<std::size_t>(horizon.initial.size()) != states)
      throw Error(ErrorCode::dimension_mismatch, "finite-horizon initial distribution has the wrong size");
    Distribution check(horizon.initial, 1e-9);
  }
}

TransitionMatrix controlled_matrix(const TransitionMatrix& a, const Matrix& delta) {
  check_shapes(a, delta);
  Matrix p = a.matrix() + delta;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p.data()[i] < 0.0) {
      if (p.data()[i] > -kNonzeroThreshold) p.data()[i] = 0.0;
      else throw Error(ErrorCode::invalid_argument, "A + A' has a negative entry");
    }
  return TransitionMatrix(std::move(p), kEffectiveTolerance);
}

Distribution controlled_distribution(const TransitionMatrix& a, const Matrix& delta, const Horizon& horizon) {
  const TransitionMatrix p = controlled_matrix(a, delta);
  if (horizon.kind == HorizonKind::stationary) return chain::stationary(p);
  return Distribution::normalized(finite_horizon(p.matrix(), horizon.initial, horizon.tau));
}

ObjectiveTerms objective_terms(const TransitionMatrix& a, const Matrix& delta, const Vector& reward,
                               const ControlConfig& config) {
  check_shapes(a, delta);
  if (static_cast<std::size_t>(reward.size()) != a.size())
    throw Error(ErrorCode::dimension_mismatch, "reward vector length differs from K");
  ObjectiveTerms t;
  const Matrix effective = a.matrix() + delta;
  t.log_fold = log_fold(a.matrix(), effective);
  t.nonzeros = count_nonzeros(delta);
  t.reward = reward.dot(controlled_distribution(a, delta, config.horizon).vector());
  t.value = t.reward - config.lambda1 * static_cast<double>(t.nonzeros) - config.lambda2 * t.log_fold;
  return t;
}

std::vector<Site> candidate_set(const Matrix& effective, double fraction, CandidateRanking ranking,
                                const Vector* stationary) {
  if (!(fraction > 0.0 && fraction <= 1.0))
    throw Error(ErrorCode::invalid_argument, "candidate fraction must lie in (0, 1]");
  const auto k = static_cast<std::size_t>(effective.rows());
  if (ranking == CandidateRanking::flow && (stationary == nullptr || static_cast<std::size_t>(stationary->size()) != k))
    throw Error(ErrorCode::invalid_argument, "flow ranking needs a distribution of length K");

  struct Entry {
    double key;
    std::size_t row;
    std::size_t col;
  };
  std::vector<Entry> entries;
  entries.reserve(k * (k > 0 ? k - 1 : 0));
  for (std::size_t row = 0; row < k; ++row)
    for (std::size_t col = 0; col < k; ++col) {
      if (row == col) continue;
      const double v = effective(idx(row), idx(col));
      if (!(v > 0.0)) continue;
      const double key = ranking == CandidateRanking::flow ? (*stationary)(idx(col)) * v : v;
      entries.push_back({key, row, col});
    }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    if (x.key != y.key) return x.key > y.key;
    return std::tie(x.row, x.col) < std::tie(y.row, y.col);
  });
  const double wanted = fraction * static_cast<double>(k * (k - 1));
  auto count = static_cast<std::size_t>(std::ceil(wanted - 1e-9));
  count = std::min(count, entries.size());
  std::vector<Site> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) out.push_back({entries[n].col, entries[n].row});
  return out;
}

void apply_suppression(const TransitionMatrix& a, Matrix& delta, Site site, double h) {
  check_shapes(a, delta);
  if (site.from == site.to) throw Error(ErrorCode::invalid_argument, "cannot suppress a self-transition");
  if (site.from >= a.size() || site.to >= a.size()) throw Error(ErrorCode::invalid_argument, "site out of range");
  if (!(h > 0.0 && h <= 1.0)) throw Error(ErrorCode::invalid_argument, "suppression fraction must lie in (0, 1]");
  const auto j = idx(site.to);
  const auto i = idx(site.from);
  const double effective = a.matrix()(j, i) + delta(j, i);
  if (!(effective > 0.0))
    throw Error(ErrorCode::invalid_argument, "cannot suppress a transition with zero probability");
  const double moved = h * effective;
  delta(j, i) -= moved;
  delta(i, i) += moved;
}

MoveEvaluator::MoveEvaluator(const TransitionMatrix& a, const Matrix& delta, const Vector& reward,
                             const ControlConfig& config)
    : a_(a), delta_(delta), reward_(reward), config_(config) {
  const TransitionMatrix p = controlled_matrix(a, delta);
  effective_ = p.matrix();
  base_log_fold_ = log_fold(a.matrix(), effective_);
  base_nonzeros_ = count_nonzeros(delta);
  const auto k = effective_.rows();
  if (config.horizon.kind == HorizonKind::stationary) {
    z_ = chain::stationary(p).vector();
    Matrix m = Matrix::Identity(k, k) - effective_ + z_ * Vector::Ones(k).transpose();
    Eigen::PartialPivLU<Matrix> lu(m);
    if (!(lu.rcond() > std::numeric_limits<double>::epsilon()))
      throw Error(ErrorCode::singular_system, "fundamental matrix is singular; the chain is not ergodic");
    fundamental_ = lu.inverse();
    reward_weights_.resize(k);
    simd::active().matvec_transposed(fundamental_.data(), static_cast<std::size_t>(k),
                                     static_cast<std::size_t>(k), reward.data(), reward_weights_.data());
    base_reward_ = reward.dot(z_);
  } else {
    const std::size_t steps = config.horizon.tau - 1;
    const auto kk = static_cast<std::size_t>(k);
    const auto& kt = simd::active();
    forward_.resize(k, idx(std::max<std::size_t>(steps, 1)));
    backward_.resize(k, idx(std::max<std::size_t>(steps, 1)));
    z_ = config.horizon.initial;
    Vector rho = reward;
    Vector next(k);
    for (std::size_t s = 0; s < steps; ++s) {
      forward_.col(idx(s)) = z_;
      backward_.col(idx(s)) = rho;
      kt.matvec(effective_.data(), kk, kk, z_.data(), next.data());
      z_.swap(next);
      kt.matvec_transposed(effective_.data(), kk, kk, rho.data(), next.data());
      rho.swap(next);
    }
    powers_.reserve(steps);
    if (steps > 0) powers_.push_back(Matrix::Identity(k, k));
    for (std::size_t s = 1; s < steps; ++s) powers_.push_back(effective_ * powers_.back());
    base_reward_ = reward.dot(z_);
  }
  base_value_ = base_reward_ - config.lambda1 * static_cast<double>(base_nonzeros_) -
                config.lambda2 * base_log_fold_;
}

MoveEvaluator::LocalChange MoveEvaluator::local_change(Site site, double h) const {
  const auto j = idx(site.to);
  const auto i = idx(site.from);
  const double e_ji = effective_(j, i);
  const double e_ii = effective_(i, i);
  const double moved = h * e_ji;
  const double new_ji = e_ji - moved;
  const double new_ii = e_ii + moved;
  if (a_.matrix()(j, i) != 0.0 && !(new_ji > 0.0))
    throw Error(ErrorCode::log_divergence, "suppression drives a transition to zero");
  LocalChange c{};
  c.log_fold_delta = log_term(new_ji, a_.matrix()(j, i)) - log_term(e_ji, a_.matrix()(j, i)) +
                     log_term(new_ii, a_.matrix()(i, i)) - log_term(e_ii, a_.matrix()(i, i));
  auto nz = [](double v) { return std::abs(v) > kNonzeroThreshold ? 1L : 0L; };
  c.nonzero_delta = nz(delta_(j, i) - moved) - nz(delta_(j, i)) + nz(delta_(i, i) + moved) - nz(delta_(i, i));
  return c;
}

double MoveEvaluator::reward_after(Site site, double h) const {
  const auto j = idx(site.to);
  const auto i = idx(site.from);
  const double d = h * effective_(j, i);
  if (config_.horizon.kind == HorizonKind::stationary) {
    const double wi = d * (fundamental_(i, i) - fundamental_(i, j));
    const double zi = z_(i) / (1.0 - wi);
    return base_reward_ + d * (reward_weights_(i) - reward_weights_(j)) * zi;
  }
  // Column i of P loses d to row j and gains d on the diagonal, so the perturbed
  // chain differs from P only through the mass q_s sitting in state i:
  //   q_s = (P^s z1)_i + d * sum_{u<s} ((P^k)_ii - (P^k)_ij) q_u,  k = s-1-u
  //   r^T z' = r^T P^{tau-1} z1 + d * sum_u (rho_{tau-2-u})_i - (rho_{tau-2-u})_j) q_u
  // with rho_k = (P^T)^k r.
  const std::size_t steps = config_.horizon.tau - 1;
  if (steps == 0) return base_reward_;
  std::vector<double> q(steps);
  std::vector<double> c(steps);
  for (std::size_t n = 0; n < steps; ++n) c[n] = powers_[n](i, i) - powers_[n](i, j);
  double gain = 0.0;
  for (std::size_t s = 0; s < steps; ++s) {
    double acc = 0.0;
    for (std::size_t u = 0; u < s; ++u) acc += c[s - 1 - u] * q[u];
    q[s] = forward_(i, idx(s)) + d * acc;
    const auto back = idx(steps - 1 - s);
    gain += (backward_(i, back) - backward_(j, back)) * q[s];
  }
  return base_reward_ + d * gain;
}

double MoveEvaluator::value_after(Site site, double h) const {
  const auto c = local_change(site, h);
  const double nnz = static_cast<double>(static_cast<long>(base_nonzeros_) + c.nonzero_delta);
  return reward_after(site, h) - config_.lambda1 * nnz - config_.lambda2 * (base_log_fold_ + c.log_fold_delta);
}

double MoveEvaluator::smooth_value_after(Site site, double h) const {
  const auto c = local_change(site, h);
  return reward_after(site, h) - config_.lambda2 * (base_log_fold_ + c.log_fold_delta);
}

ControlPlan greedy_optimize(const TransitionMatrix& a, const Vector& reward, const ControlConfig& config) {
  const std::size_t k = a.size();
  config.validate(k);
  if (static_cast<std::size_t>(reward.size()) != k)
    throw Error(ErrorCode::dimension_mismatch, "reward vector length differs from K");
  for (Eigen::Index n = 0; n < reward.size(); ++n)
    if (!std::isfinite(reward(n))) throw Error(ErrorCode::non_finite, "reward has a non-finite entry");

  std::vector<double> levels = config.suppression_levels;
  std::sort(levels.begin(), levels.end());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());

  ControlPlan plan;
  plan.delta = Matrix::Zero(idx(k), idx(k));
  double current = objective(a, plan.delta, reward, config);
  plan.objective_trace.push_back(current);
  std::vector<Site> order;

  for (std::size_t iter = 0; iter < config.max_iterations && k > 1; ++iter) {
    const MoveEvaluator eval(a, plan.delta, reward, config);
    const Matrix effective = a.matrix() + plan.delta;
    std::vector<Site> candidates;
    if (config.ranking == CandidateRanking::flow) {
      const Vector occupancy = config.horizon.kind == HorizonKind::stationary
                                   ? eval.current_distribution()
                                   : mean_occupancy(effective, config.horizon.initial, config.horizon.tau);
      candidates = candidate_set(effective, config.candidate_fraction, config.ranking, &occupancy);
    } else {
      candidates = candidate_set(effective, config.candidate_fraction);
    }

    // Screen: a slight suppression must not lower the smooth part of G.
    const double smooth_base = eval.base_smooth_value();
    std::erase_if(candidates, [&](const Site& s) {
      return eval.smooth_value_after(s, config.probe_suppression) < smooth_base;
    });

    std::optional<std::tuple<double, double, Site>> best;  // (G, h, site)
    for (const Site& s : candidates)
      for (double h : levels) {
        const double g = eval.value_after(s, h);
        if (!best) {
          best.emplace(g, h, s);
          continue;
        }
        const auto& [bg, bh, bs] = *best;
        const bool better = g > bg || (g == bg && (h < bh || (h == bh && std::tie(s.from, s.to) <
                                                                              std::tie(bs.from, bs.to))));
        if (better) best.emplace(g, h, s);
      }
    if (!best) break;

    const auto& [g_est, h, site] = *best;
    Matrix trial = plan.delta;
    apply_suppression(a, trial, site, h);
    const double g = objective(a, trial, reward, config);
    if (!(g > current)) break;
    plan.delta = std::move(trial);
    current = g;
    plan.objective_trace.push_back(g);
    if (std::find(order.begin(), order.end(), site) == order.end()) order.push_back(site);
  }

  const auto found = interventions_of(a, plan.delta);
  for (const Site& s : order)
    for (const auto& iv : found)
      if (iv.site == s) plan.interventions.push_back(iv);
  return plan;
}

std::vector<Intervention> interventions_of(const TransitionMatrix& a, const Matrix& delta) {
  check_shapes(a, delta);
  std::vector<Intervention> out;
  const std::size_t k = a.size();
  for (std::size_t from = 0; from < k; ++from)
    for (std::size_t to = 0; to < k; ++to) {
      if (from == to) continue;
      const double d = delta(idx(to), idx(from));
      if (!(d < -kNonzeroThreshold)) continue;
      Intervention iv;
      iv.site = {from, to};
      iv.original = a(to, from);
      iv.controlled = iv.original + d;
      iv.cumulative_suppression = iv.original > 0.0 ? -d / iv.original : 0.0;
      out.push_back(iv);
    }
  return out;
}

DistributionSeries simulate_controlled(const TransitionMatrix& a, const Matrix& delta, const Distribution& z0,
                                       std::size_t steps) {
  return chain::evolve(controlled_matrix(a, delta), z0, steps);
}

}  // namespace mcsc::control
