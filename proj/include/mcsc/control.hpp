#pragma once

// Sparse suppression controller: objective evaluation and the greedy search.
//
// A plan is a K x K matrix delta (A' in the usual notation) with zero column
// sums such that A + delta stays column-stochastic. Only suppression is
// produced: an off-diagonal entry is reduced by a fraction h of its current
// value and the removed probability is added to the source state's
// self-transition.

#include <cstddef>
#include <optional>
#include <vector>

#include "mcsc/types.hpp"

namespace mcsc::control {

// Transition from state `from` to state `to` (0-based); lives at entry (to, from).
struct Site {
  std::size_t from = 0;
  std::size_t to = 0;
  friend bool operator==(const Site&, const Site&) = default;
};

enum class HorizonKind { stationary, finite };

struct Horizon {
  HorizonKind kind = HorizonKind::stationary;
  std::size_t tau = 1;  // finite: z' = (A + delta)^(tau - 1) z(1)
  Vector initial;       // finite: z(1)

  static Horizon stationary() { return {}; }
  static Horizon finite(std::size_t tau, Vector initial) {
    return {HorizonKind::finite, tau, std::move(initial)};
  }
};

enum class CandidateRanking { probability, flow };

struct ControlConfig {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  std::vector<double> suppression_levels{0.5, 0.8, 0.9};
  double candidate_fraction = 0.2;
  Horizon horizon;
  double probe_suppression = 0.1;
  CandidateRanking ranking = CandidateRanking::probability;
  std::size_t max_iterations = 1000;

  void validate(std::size_t states) const;
};

struct Intervention {
  Site site;
  double original = 0.0;    // A(to, from)
  double controlled = 0.0;  // (A + delta)(to, from)
  double cumulative_suppression = 0.0;
};

struct ControlPlan {
  Matrix delta;
  std::vector<Intervention> interventions;  // in order of first suppression
  std::vector<double> objective_trace;      // G before the first and after each committed step
};

// Entries of delta with magnitude above this count toward the L0 term.
inline constexpr double kNonzeroThreshold = 1e-15;

struct ObjectiveTerms {
  double reward = 0.0;
  std::size_t nonzeros = 0;
  double log_fold = 0.0;
  double value = 0.0;
};

// Throws Error(log_divergence) when an entry with A != 0 is driven to zero.
ObjectiveTerms objective_terms(const TransitionMatrix& a, const Matrix& delta, const Vector& reward,
                               const ControlConfig& config);
inline double objective(const TransitionMatrix& a, const Matrix& delta, const Vector& reward,
                        const ControlConfig& config) {
  return objective_terms(a, delta, reward, config).value;
}

// Stationary distribution of A + delta, or the finite-horizon distribution.
Distribution controlled_distribution(const TransitionMatrix& a, const Matrix& delta, const Horizon& horizon);

// Off-diagonal positive entries of `effective` ranked by value (or by flow
// z_i * P(j, i) when ranking == flow), ties by (row, column); the top
// ceil(fraction * K * (K - 1)) are returned.
std::vector<Site> candidate_set(const Matrix& effective, double fraction,
                                CandidateRanking ranking = CandidateRanking::probability,
                                const Vector* stationary = nullptr);

// Throws Error(invalid_argument) when the effective entry is zero.
void apply_suppression(const TransitionMatrix& a, Matrix& delta, Site site, double h);

ControlPlan greedy_optimize(const TransitionMatrix& a, const Vector& reward, const ControlConfig& config);

DistributionSeries simulate_controlled(const TransitionMatrix& a, const Matrix& delta, const Distribution& z0,
                                       std::size_t steps);

// A + delta as a validated transition matrix.
TransitionMatrix controlled_matrix(const TransitionMatrix& a, const Matrix& delta);

// Suppressed sites read back from delta, ordered by (from, to).
std::vector<Intervention> interventions_of(const TransitionMatrix& a, const Matrix& delta);

// Incremental evaluator for single suppressions on top of a fixed plan. For
// the stationary horizon it uses the fundamental matrix
// Z = (I - P + z e^T)^-1 of P = A + delta: suppressing column i by
// u = d (e_i - e_j) moves the stationary point to z + Z u * z_i / (1 - (Z u)_i).
class MoveEvaluator {
 public:
  MoveEvaluator(const TransitionMatrix& a, const Matrix& delta, const Vector& reward,
                const ControlConfig& config);

  double base_value() const noexcept { return base_value_; }
  // G without the L0 term.
  double base_smooth_value() const noexcept { return base_reward_ - config_.lambda2 * base_log_fold_; }

  double reward_after(Site site, double h) const;
  double value_after(Site site, double h) const;
  double smooth_value_after(Site site, double h) const;

  const Vector& current_distribution() const noexcept { return z_; }

 private:
  struct LocalChange {
    double log_fold_delta;
    long nonzero_delta;
  };
  LocalChange local_change(Site site, double h) const;

  TransitionMatrix a_;
  Matrix delta_;
  Vector reward_;
  ControlConfig config_;
  Matrix effective_;
  Vector z_;
  Matrix fundamental_;
  Vector reward_weights_;  // Z^T r
  Matrix forward_;              // column s: P^s z1
  Matrix backward_;             // column k: (P^T)^k r
  std::vector<Matrix> powers_;  // P^k
  double base_reward_ = 0.0;
  double base_log_fold_ = 0.0;
  std::size_t base_nonzeros_ = 0;
  double base_value_ = 0.0;
};

}  // namespace mcsc::control
