#include "mcsc/chain.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "mcsc/error.hpp"
#include "mcsc/simd/kernels.hpp"

namespace mcsc::chain {
namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

void check_label(int label, std::size_t states) {
  if (label < 1 || static_cast<std::size_t>(label) > states)
    throw Error(ErrorCode::invalid_argument,
                "state label " + std::to_string(label) + " outside 1.." + std::to_string(states));
}

// Unvisited states keep all their mass (self-transition column).
Matrix normalize_counts(Matrix counts) {
  for (Eigen::Index i = 0; i < counts.cols(); ++i) {
    double total = 0.0;
    for (Eigen::Index j = 0; j < counts.rows(); ++j) total += counts(j, i);
    if (total > 0.0) {
      for (Eigen::Index j = 0; j < counts.rows(); ++j) counts(j, i) /= total;
    } else {
      counts(i, i) = 1.0;
    }
  }
  return counts;
}

}  // namespace

LabeledSeries::LabeledSeries(std::vector<Observation> records, std::size_t states)
    : states_(states) {
  if (states == 0) throw Error(ErrorCode::invalid_argument, "state count must be positive");
  std::unordered_map<std::string, std::size_t> group;
  std::vector<std::vector<Observation>> by_individual;
  for (auto& r : records) {
    check_label(r.label, states);
    auto [it, inserted] = group.try_emplace(r.individual, by_individual.size());
    if (inserted) by_individual.emplace_back();
    by_individual[it->second].push_back(std::move(r));
  }
  for (auto& obs : by_individual) {
    std::stable_sort(obs.begin(), obs.end(),
                     [](const Observation& a, const Observation& b) { return a.time < b.time; });
    for (std::size_t n = 1; n < obs.size(); ++n)
      if (obs[n].time == obs[n - 1].time)
        throw Error(ErrorCode::duplicate_record,
                    "duplicate observation for individual '" + obs[n].individual + "' at time " +
                        std::to_string(obs[n].time));
    const std::size_t begin = records_.size();
    for (auto& o : obs) records_.push_back(std::move(o));
    ranges_.push_back({begin, records_.size()});
  }
}

Vector LabeledSeries::histogram() const {
  Vector h = Vector::Zero(idx(states_));
  for (const auto& r : records_) h(r.label - 1) += 1.0;
  if (!records_.empty()) h /= static_cast<double>(records_.size());
  return h;
}

Vector LabeledSeries::initial_histogram() const {
  Vector h = Vector::Zero(idx(states_));
  for (const auto& range : ranges_) h(records_[range.begin].label - 1) += 1.0;
  if (!ranges_.empty()) h /= static_cast<double>(ranges_.size());
  return h;
}

EventSet extract_events(const LabeledSeries& series, const EventOptions& options) {
  if (options.time_step <= 0) throw Error(ErrorCode::invalid_argument, "time_step must be positive");
  EventSet out;
  out.states = series.states();
  const auto& rec = series.records();
  for (const auto& range : series.individuals()) {
    for (std::size_t n = range.begin + 1; n < range.end; ++n) {
      const auto& prev = rec[n - 1];
      const auto& cur = rec[n];
      if (!options.bridge_gaps && cur.time - prev.time != options.time_step) continue;
      out.events.push_back({prev.individual, prev.time, prev.label, cur.label});
    }
  }
  return out;
}

EventSet apply_resetting(const EventSet& events, const LabeledSeries& series, ResetMode mode) {
  if (events.reset != ResetMode::none)
    throw Error(ErrorCode::already_reset, "resetting has already been applied to this event set");
  if (series.empty()) throw Error(ErrorCode::insufficient_data, "resetting needs a non-empty series");
  if (series.states() != events.states)
    throw Error(ErrorCode::dimension_mismatch, "series and event set disagree on the state count");
  EventSet out = events;
  if (mode == ResetMode::none) return out;
  out.reset = mode;
  const auto& rec = series.records();
  const int dummy = static_cast<int>(events.states) + 1;
  for (const auto& range : series.individuals()) {
    const auto& first = rec[range.begin];
    const auto& last = rec[range.end - 1];
    if (mode == ResetMode::loop) {
      out.events.push_back({last.individual, last.time, last.label, first.label});
    } else {
      out.events.push_back({last.individual, last.time, last.label, dummy});
      out.events.push_back({last.individual, last.time + 1, dummy, first.label});
    }
  }
  if (mode == ResetMode::dummy) out.states = events.states + 1;
  return out;
}

TransitionMatrix estimate_relative_frequency(const EventSet& events) {
  const auto k = idx(events.states);
  if (k == 0) throw Error(ErrorCode::invalid_argument, "event set has no states");
  Matrix counts = Matrix::Zero(k, k);
  for (const auto& e : events.events) {
    check_label(e.from, events.states);
    check_label(e.to, events.states);
    counts(e.to - 1, e.from - 1) += 1.0;
  }
  return TransitionMatrix(normalize_counts(std::move(counts)));
}

TransitionMatrix estimate_weighted(const EventSet& events, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta))
    throw Error(ErrorCode::invalid_argument, "eta must be positive and finite");
  const auto k = idx(events.states);
  if (k == 0) throw Error(ErrorCode::invalid_argument, "event set has no states");

  // Per (individual, source) outgoing counts.
  std::unordered_map<std::string, std::size_t> id_of;
  std::vector<Matrix> per_individual;
  for (const auto& e : events.events) {
    check_label(e.from, events.states);
    check_label(e.to, events.states);
    auto [it, inserted] = id_of.try_emplace(e.individual, per_individual.size());
    if (inserted) per_individual.push_back(Matrix::Zero(k, k));
    per_individual[it->second](e.to - 1, e.from - 1) += 1.0;
  }

  Matrix weighted = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    // Weights are taken relative to the largest one, (n_min + eta) / (n_m + eta),
    // so a column fed by a single individual reproduces plain counts exactly.
    double n_min = -1.0;
    for (const auto& c : per_individual) {
      const double n = c.col(i).sum();
      if (n > 0.0 && (n_min < 0.0 || n < n_min)) n_min = n;
    }
    if (n_min < 0.0) continue;
    for (const auto& c : per_individual) {
      const double n = c.col(i).sum();
      if (n == 0.0) continue;
      const double w = n == n_min ? 1.0 : (n_min + eta) / (n + eta);
      for (Eigen::Index j = 0; j < k; ++j) weighted(j, i) += w * c(j, i);
    }
  }
  return TransitionMatrix(normalize_counts(std::move(weighted)));
}

TransitionMatrix apply_damping(const TransitionMatrix& a, double epsilon) {
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw Error(ErrorCode::invalid_argument, "damping epsilon must be nonnegative and finite");
  if (epsilon == 0.0) return a;
  const double k = static_cast<double>(a.size());
  Matrix m = (a.matrix().array() + epsilon) / (1.0 + epsilon * k);
  return TransitionMatrix(std::move(m));
}

TransitionMatrix smooth_kernel(const TransitionMatrix& a, const geometry::DistanceMatrix& d,
                               double gamma) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw Error(ErrorCode::invalid_argument, "smoothing gamma must be nonnegative and finite");
  const std::size_t k = a.size();
  if (d.size() != k) throw Error(ErrorCode::dimension_mismatch, "distance matrix size differs from K");
  Matrix w(idx(k), idx(k));
  for (Eigen::Index i = 0; i < w.rows(); ++i)
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(j, i) = std::exp(-gamma * d.matrix()(j, i) * d.matrix()(j, i));

  Matrix out(idx(k), idx(k));
  const auto& kt = simd::active();
  for (std::size_t i = 0; i < k; ++i) {
    const double* wi = w.data() + i * k;
    double* col = out.data() + i * k;
    kt.matvec(a.matrix().data(), k, k, wi, col);
    const double s = kt.sum(wi, k);
    for (std::size_t j = 0; j < k; ++j) col[j] /= s;
  }
  return TransitionMatrix(std::move(out));
}

DistributionSeries evolve(const TransitionMatrix& a, const Distribution& z0, std::size_t steps) {
  if (z0.size() != a.size()) throw Error(ErrorCode::dimension_mismatch, "initial distribution size differs from K");
  DistributionSeries out;
  out.times.reserve(steps + 1);
  out.points.reserve(steps + 1);
  out.times.push_back(0.0);
  out.points.push_back(z0);
  const std::size_t k = a.size();
  const auto& kt = simd::active();
  Vector next(idx(k));
  for (std::size_t t = 0; t < steps; ++t) {
    kt.matvec(a.matrix().data(), k, k, out.points.back().vector().data(), next.data());
    out.times.push_back(static_cast<double>(t + 1));
    out.points.emplace_back(next);
  }
  return out;
}

ReducedSystem reduce(const TransitionMatrix& a) {
  const auto k = idx(a.size());
  if (k < 2) throw Error(ErrorCode::invalid_argument, "reduced form needs K >= 2");
  ReducedSystem r;
  r.a_tilde = a.matrix().topLeftCorner(k - 1, k - 1);
  r.a = a.matrix().col(k - 1).head(k - 1);
  r.a_prime_tilde = r.a_tilde - r.a * Vector::Ones(k - 1).transpose();
  return r;
}

Distribution stationary_reduced(const ReducedSystem& reduced) {
  const auto n = reduced.a_tilde.rows();
  Matrix system = Matrix::Identity(n, n) - reduced.a_prime_tilde;
  Eigen::PartialPivLU<Matrix> lu(system);
  if (!(lu.rcond() > std::numeric_limits<double>::epsilon()))
    throw Error(ErrorCode::singular_system,
                "reduced stationary system is singular; the chain is not ergodic (apply damping)");
  Vector zt = lu.solve(reduced.a);
  Vector z(n + 1);
  z.head(n) = zt;
  z(n) = 1.0 - zt.sum();
  return Distribution::normalized(std::move(z));
}

Distribution stationary(const TransitionMatrix& a, const StationaryOptions& options) {
  const std::size_t k = a.size();
  if (k == 1) return Distribution::point_mass(1, 0);
  if (options.method == StationaryMethod::reduced_form) return stationary_reduced(reduce(a));

  if (!(options.tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tolerance must be positive");
  const auto& kt = simd::active();
  Vector z = Vector::Constant(idx(k), 1.0 / static_cast<double>(k));
  Vector next(idx(k));
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    kt.matvec(a.matrix().data(), k, k, z.data(), next.data());
    next /= kt.sum(next.data(), k);
    const double diff = kt.l1_distance(next.data(), z.data(), k);
    z.swap(next);
    if (diff < options.tol) return Distribution::normalized(std::move(z));
  }
  throw Error(ErrorCode::no_convergence,
              "power iteration did not converge within " + std::to_string(options.max_iterations) +
                  " steps");
}

double stationarity_residual(const TransitionMatrix& a, const Distribution& z) {
  Vector az = a.matrix() * z.vector();
  return (az - z.vector()).lpNorm<1>();
}

}  // namespace mcsc::chain
