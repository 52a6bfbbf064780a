#pragma once

// Seeded generators for the benchmark dynamical systems.

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcsc/types.hpp"

namespace mcsc::models {

enum class ModelKind { dw1, dw2, branching, lorenz, rossler };

std::string to_string(ModelKind kind);
ModelKind model_from_string(const std::string& name);

struct SimConfig {
  ModelKind model = ModelKind::dw1;
  std::size_t steps = 10'000;  // T, points per trajectory
  double dt = 0.01;
  double sigma = 1.0;
  std::size_t trials = 1;  // M
  std::uint64_t seed = 0;
  std::vector<double> initial;  // empty: model default
  std::size_t transient_steps = 0;

  double theta = 0.0;  // branching drift in y; <= 0 means 1 / ((T - 1) dt)
  double rho = 28.0, lorenz_sigma = 10.0, beta = 8.0 / 3.0;
  double a = 0.1, b = 0.1, c = 14.0;

  void validate() const;
  // Defaults for each model (step count, dt, noise, trials, transient).
  static SimConfig defaults(ModelKind kind);
};

struct Trajectory {
  std::string individual;
  std::vector<double> times;
  PointSet points;
};

// Drift functions.
double dw1_drift(double x);
std::array<double, 2> dw2_drift(double x, double y);
std::array<double, 3> branching_memberships(double y);
std::array<double, 2> branching_drift(double x, double y, double theta);
std::array<double, 3> lorenz_field(const std::array<double, 3>& v, double sigma, double rho, double beta);
std::array<double, 3> rossler_field(const std::array<double, 3>& v, double a, double b, double c);

// One classical RK4 step of dv/dt = f(v).
template <std::size_t N, class F>
std::array<double, N> rk4_step(const std::array<double, N>& v, double dt, F&& f) {
  auto shifted = [&](const std::array<double, N>& k, double s) {
    std::array<double, N> out;
    for (std::size_t d = 0; d < N; ++d) out[d] = v[d] + s * k[d];
    return out;
  };
  const auto k1 = f(v);
  const auto k2 = f(shifted(k1, 0.5 * dt));
  const auto k3 = f(shifted(k2, 0.5 * dt));
  const auto k4 = f(shifted(k3, dt));
  std::array<double, N> out;
  for (std::size_t d = 0; d < N; ++d) out[d] = v[d] + dt * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]) / 6.0;
  return out;
}

Trajectory simulate_dw1(const SimConfig& config);
Trajectory simulate_dw2(const SimConfig& config);
std::vector<Trajectory> simulate_branching(const SimConfig& config);
Trajectory simulate_attractor(const SimConfig& config);

// Dispatches on config.model; one trajectory per trial.
std::vector<Trajectory> simulate(const SimConfig& config);

}  // namespace mcsc::models
