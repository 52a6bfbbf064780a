#pragma once

// Markov chain estimation from discretized longitudinal data, robustness
// transforms, distribution evolution and stationary distributions.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mcsc/geometry.hpp"
#include "mcsc/types.hpp"

namespace mcsc::chain {

struct Observation {
  std::string individual;
  std::int64_t time = 0;
  int label = 0;  // 1..K
};

// Discretized data x~(m, t). Records are grouped by individual and sorted by
// time on construction.
class LabeledSeries {
 public:
  LabeledSeries() = default;
  // Throws on labels outside 1..K or duplicate (individual, time) pairs.
  LabeledSeries(std::vector<Observation> records, std::size_t states);

  std::size_t states() const noexcept { return states_; }
  const std::vector<Observation>& records() const noexcept { return records_; }
  bool empty() const noexcept { return records_.empty(); }

  // Half-open ranges into records(), one per individual, in first-seen order.
  struct Range {
    std::size_t begin;
    std::size_t end;
  };
  const std::vector<Range>& individuals() const noexcept { return ranges_; }

  // Label frequencies over all records.
  Vector histogram() const;
  // Label frequencies of each individual's first record.
  Vector initial_histogram() const;

 private:
  std::vector<Observation> records_;
  std::vector<Range> ranges_;
  std::size_t states_ = 0;
};

struct Event {
  std::string individual;
  std::int64_t time = 0;
  int from = 0;  // 1-based
  int to = 0;
};

enum class ResetMode { none, loop, dummy };

struct EventSet {
  std::vector<Event> events;
  std::size_t states = 0;
  ResetMode reset = ResetMode::none;  // provenance; resetting twice is rejected
};

struct EventOptions {
  std::int64_t time_step = 1;  // consecutive observations differ by this much
  bool bridge_gaps = false;    // pair any adjacent observations regardless of spacing
};

EventSet extract_events(const LabeledSeries& series, const EventOptions& options = {});

// Adds, per individual, last -> first (loop) or last -> K+1 -> first (dummy).
EventSet apply_resetting(const EventSet& events, const LabeledSeries& series, ResetMode mode);

// Relative frequencies. States with no outgoing event get a self-transition column.
TransitionMatrix estimate_relative_frequency(const EventSet& events);

// Individual-weighted frequencies with w(m, i) = 1 / (n_m(i) + eta).
TransitionMatrix estimate_weighted(const EventSet& events, double eta);

// (A + eps * ones) / (1 + eps * K).
TransitionMatrix apply_damping(const TransitionMatrix& a, double epsilon);

// Each column becomes the exp(-gamma * D_ij^2)-weighted mean of all columns.
TransitionMatrix smooth_kernel(const TransitionMatrix& a, const geometry::DistanceMatrix& d,
                               double gamma);

// z(0) = z0, z(t+1) = A z(t); returns steps + 1 points at times 0..steps.
DistributionSeries evolve(const TransitionMatrix& a, const Distribution& z0, std::size_t steps);

enum class StationaryMethod { reduced_form, power_iteration };

struct StationaryOptions {
  StationaryMethod method = StationaryMethod::reduced_form;
  double tol = 1e-12;
  std::size_t max_iterations = 1'000'000;
};

Distribution stationary(const TransitionMatrix& a, const StationaryOptions& options = {});

// Chain written in the first K-1 coordinates.
struct ReducedSystem {
  Matrix a_tilde;        // top-left (K-1) x (K-1) block
  Vector a;              // first K-1 entries of column K
  Matrix a_prime_tilde;  // a_tilde - a e^T
};

ReducedSystem reduce(const TransitionMatrix& a);

// Solves (I - a_tilde + a e^T) z~ = a and appends 1 - e^T z~.
Distribution stationary_reduced(const ReducedSystem& reduced);

// L1 norm of A z - z.
double stationarity_residual(const TransitionMatrix& a, const Distribution& z);

}  // namespace mcsc::chain
