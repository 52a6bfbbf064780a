#include "mcsc/models.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "mcsc/error.hpp"

namespace mcsc::models {
namespace {

constexpr double kPi = std::numbers::pi;

std::mt19937_64 trial_rng(std::uint64_t seed, std::size_t trial) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32)};
  return std::mt19937_64(seq);
}

template <std::size_t N>
std::array<double, N> initial_or(const SimConfig& config, std::array<double, N> fallback) {
  if (config.initial.empty()) return fallback;
  if (config.initial.size() != N)
    throw Error(ErrorCode::dimension_mismatch, "initial state has the wrong dimension for " + to_string(config.model));
  std::array<double, N> out;
  for (std::size_t d = 0; d < N; ++d) out[d] = config.initial[d];
  return out;
}

template <std::size_t N>
Trajectory make_trajectory(std::size_t trial, std::size_t steps) {
  Trajectory tr;
  tr.individual = std::to_string(trial + 1);
  tr.times.reserve(steps);
  tr.points = PointSet(N);
  return tr;
}

// Euler-Maruyama: v += f(v) dt + noise .* sqrt(dt) xi.
template <std::size_t N, class F>
Trajectory euler_maruyama(const SimConfig& config, std::size_t trial, std::array<double, N> v, F&& drift,
                          const std::array<double, N>& noise) {
  auto rng = trial_rng(config.seed, trial);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double sq = std::sqrt(config.dt);
  Trajectory tr = make_trajectory<N>(trial, config.steps);
  for (std::size_t t = 0; t < config.steps; ++t) {
    tr.times.push_back(static_cast<double>(t));
    tr.points.push_back(v);
    if (t + 1 == config.steps) break;
    const auto f = drift(v);
    for (std::size_t d = 0; d < N; ++d) {
      double step = f[d] * config.dt;
      if (noise[d] != 0.0) step += noise[d] * sq * normal(rng);
      v[d] += step;
    }
  }
  return tr;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::dw1: return "dw1";
    case ModelKind::dw2: return "dw2";
    case ModelKind::branching: return "branching";
    case ModelKind::lorenz: return "lorenz";
    case ModelKind::rossler: return "rossler";
  }
  return "unknown";
}

ModelKind model_from_string(const std::string& name) {
  if (name == "dw1") return ModelKind::dw1;
  if (name == "dw2") return ModelKind::dw2;
  if (name == "branching") return ModelKind::branching;
  if (name == "lorenz") return ModelKind::lorenz;
  if (name == "rossler") return ModelKind::rossler;
  throw Error(ErrorCode::schema_error, "unknown model '" + name + "'");
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw Error(ErrorCode::invalid_argument, "dt must be positive");
  if (steps < 2) throw Error(ErrorCode::invalid_argument, "T must be at least 2");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw Error(ErrorCode::invalid_argument, "sigma must be nonnegative");
  if (trials < 1) throw Error(ErrorCode::invalid_argument, "at least one trial is required");
}

SimConfig SimConfig::defaults(ModelKind kind) {
  SimConfig c;
  c.model = kind;
  switch (kind) {
    case ModelKind::dw1:
      c.steps = 10'000, c.dt = 0.01, c.sigma = 1.0;
      break;
    case ModelKind::dw2:
      c.steps = 10'000, c.dt = 0.05, c.sigma = 1.0;
      break;
    case ModelKind::branching:
      c.steps = 100, c.dt = 0.001, c.sigma = 0.8, c.trials = 100;
      break;
    case ModelKind::lorenz:
    case ModelKind::rossler:
      c.steps = 20'000, c.dt = 0.01, c.sigma = 0.0, c.transient_steps = 1000;
      break;
  }
  return c;
}

double dw1_drift(double x) { return -4.0 * x * x * x + 4.0 * x; }

std::array<double, 2> dw2_drift(double x, double y) {
  const double s = x + y;
  const double s3 = s * s * s;
  return {-s3 - 2.0 * x + 6.0 * y, -s3 - 2.0 * y + 6.0 * x};
}

std::array<double, 3> branching_memberships(double y) {
  return {std::max(2.0 * y - 1.0, 0.0), 1.0 - std::abs(2.0 * y - 1.0), std::max(1.0 - 2.0 * y, 0.0)};
}

std::array<double, 2> branching_drift(double x, double y, double theta) {
  const auto h = branching_memberships(y);
  const double fx = h[0] * 2.0 * kPi * std::sin(2.0 * kPi * x) + h[1] * 4.0 * kPi * std::sin(4.0 * kPi * x) +
                    h[2] * 8.0 * kPi * std::sin(8.0 * kPi * x);
  return {fx, -theta};
}

std::array<double, 3> lorenz_field(const std::array<double, 3>& v, double sigma, double rho, double beta) {
  return {sigma * (v[1] - v[0]), v[0] * (rho - v[2]) - v[1], v[0] * v[1] - beta * v[2]};
}

std::array<double, 3> rossler_field(const std::array<double, 3>& v, double a, double b, double c) {
  return {-v[1] - v[2], v[0] + a * v[1], b + v[2] * (v[0] - c)};
}

namespace {

Trajectory dw1_trial(const SimConfig& config, std::size_t trial) {
  const auto v0 = initial_or<1>(config, {0.0});
  return euler_maruyama<1>(config, trial, v0, [](const std::array<double, 1>& v) {
    return std::array<double, 1>{dw1_drift(v[0])};
  }, {config.sigma});
}

Trajectory dw2_trial(const SimConfig& config, std::size_t trial) {
  const auto v0 = initial_or<2>(config, {0.0, 0.0});
  return euler_maruyama<2>(config, trial, v0, [](const std::array<double, 2>& v) {
    return dw2_drift(v[0], v[1]);
  }, {config.sigma, config.sigma});
}

}  // namespace

Trajectory simulate_dw1(const SimConfig& config) {
  config.validate();
  return dw1_trial(config, 0);
}

Trajectory simulate_dw2(const SimConfig& config) {
  config.validate();
  return dw2_trial(config, 0);
}

std::vector<Trajectory> simulate_branching(const SimConfig& config) {
  config.validate();
  const double theta = config.theta > 0.0 ? config.theta
                                          : 1.0 / (static_cast<double>(config.steps - 1) * config.dt);
  const auto v0 = initial_or<2>(config, {0.5, 1.0});
  std::vector<Trajectory> out;
  out.reserve(config.trials);
  for (std::size_t m = 0; m < config.trials; ++m)
    out.push_back(euler_maruyama<2>(config, m, v0, [theta](const std::array<double, 2>& v) {
      return branching_drift(v[0], v[1], theta);
    }, {config.sigma, 0.0}));
  return out;
}

Trajectory simulate_attractor(const SimConfig& config) {
  config.validate();
  if (config.model != ModelKind::lorenz && config.model != ModelKind::rossler)
    throw Error(ErrorCode::invalid_argument, "simulate_attractor needs the lorenz or rossler model");
  auto v = initial_or<3>(config, {1.0, 1.0, 1.0});
  auto field = [&](const std::array<double, 3>& s) {
    return config.model == ModelKind::lorenz ? lorenz_field(s, config.lorenz_sigma, config.rho, config.beta)
                                             : rossler_field(s, config.a, config.b, config.c);
  };
  for (std::size_t t = 0; t < config.transient_steps; ++t) v = rk4_step<3>(v, config.dt, field);
  Trajectory tr = make_trajectory<3>(0, config.steps);
  for (std::size_t t = 0; t < config.steps; ++t) {
    tr.times.push_back(static_cast<double>(t));
    tr.points.push_back(v);
    v = rk4_step<3>(v, config.dt, field);
  }
  return tr;
}

std::vector<Trajectory> simulate(const SimConfig& config) {
  switch (config.model) {
    case ModelKind::dw1:
    case ModelKind::dw2: {
      config.validate();
      std::vector<Trajectory> out;
      for (std::size_t m = 0; m < config.trials; ++m)
        out.push_back(config.model == ModelKind::dw1 ? dw1_trial(config, m) : dw2_trial(config, m));
      return out;
    }
    case ModelKind::branching: return simulate_branching(config);
    case ModelKind::lorenz:
    case ModelKind::rossler: return {simulate_attractor(config)};
  }
  return {};
}

}  // namespace mcsc::models
