#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mcsc/error.hpp"
#include "mcsc/geometry.hpp"
#include "mcsc/models.hpp"

using namespace mcsc;
using namespace mcsc::models;

namespace {

double rk4_error_at_one(double dt) {
  std::array<double, 1> v{1.0};
  const auto n = static_cast<int>(std::lround(1.0 / dt));
  for (int i = 0; i < n; ++i) v = rk4_step<1>(v, dt, [](const std::array<double, 1>& s) {
    return std::array<double, 1>{-s[0]};
  });
  return std::abs(v[0] - std::exp(-1.0));
}

}  // namespace

TEST_CASE("model names round-trip") {
  for (auto k : {ModelKind::dw1, ModelKind::dw2, ModelKind::branching, ModelKind::lorenz, ModelKind::rossler})
    CHECK(model_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(model_from_string("pendulum"), Error);
}

TEST_CASE("config validation") {
  auto c = SimConfig::defaults(ModelKind::dw1);
  CHECK_NOTHROW(c.validate());
  c.dt = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SimConfig::defaults(ModelKind::dw1);
  c.steps = 1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SimConfig::defaults(ModelKind::dw1);
  c.sigma = -1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = SimConfig::defaults(ModelKind::dw1);
  c.initial = {0.0, 1.0};
  CHECK_THROWS_AS(simulate_dw1(c), Error);
}

TEST_CASE("noise-free 1D double well") {
  auto c = SimConfig::defaults(ModelKind::dw1);
  c.sigma = 0.0;
  c.initial = {0.5};
  c.steps = 2000;
  const auto tr = simulate_dw1(c);
  for (std::size_t t = 1; t < tr.points.size(); ++t) CHECK(tr.points[t][0] >= tr.points[t - 1][0]);
  CHECK(tr.points[tr.points.size() - 1][0] == doctest::Approx(1.0).epsilon(1e-9));
  // explicit Euler by hand for the first step
  CHECK(tr.points[1][0] == 0.5 + dw1_drift(0.5) * 0.01);

  c.initial = {0.0};
  const auto still = simulate_dw1(c);
  for (std::size_t t = 0; t < still.points.size(); ++t) CHECK(still.points[t][0] == 0.0);
  CHECK(dw1_drift(1.0) == 0.0);
  CHECK(dw1_drift(-1.0) == 0.0);
}

TEST_CASE("1D double well histogram is bimodal with modes near the minima") {
  const auto tr = simulate_dw1(SimConfig::defaults(ModelKind::dw1));
  CHECK(tr.points.size() == 10'000);
  const std::size_t bins[] = {20};
  const auto p = geometry::partition_per_axis(tr.points, bins, geometry::EdgeRule::uniform_range);
  std::vector<double> h(20, 0.0);
  for (int l : p.labels(tr.points)) h[static_cast<std::size_t>(l - 1)] += 1.0;
  const auto c = p.centers();
  const auto left = std::max_element(h.begin(), h.begin() + 10) - h.begin();
  const auto right = std::max_element(h.begin() + 10, h.end()) - h.begin();
  CHECK(c[static_cast<std::size_t>(left)][0] == doctest::Approx(-1.0).epsilon(0.35));
  CHECK(c[static_cast<std::size_t>(right)][0] == doctest::Approx(1.0).epsilon(0.35));
  // a valley between the two modes
  const double valley = *std::min_element(h.begin() + left, h.begin() + right + 1);
  CHECK(valley < 0.5 * std::min(h[static_cast<std::size_t>(left)], h[static_cast<std::size_t>(right)]));
}

TEST_CASE("2D double well equilibria") {
  const double s = 1.0 / std::sqrt(2.0);
  for (double sign : {1.0, -1.0}) {
    const auto f = dw2_drift(sign * s, sign * s);
    CHECK(std::abs(f[0]) < 1e-14);
    CHECK(std::abs(f[1]) < 1e-14);
  }
  auto c = SimConfig::defaults(ModelKind::dw2);
  c.sigma = 0.0;
  c.initial = {0.6, 0.6};
  c.steps = 4000;
  c.dt = 0.01;
  const auto tr = simulate_dw2(c);
  const auto end = tr.points[tr.points.size() - 1];
  CHECK(end[0] == doctest::Approx(s).epsilon(1e-9));
  CHECK(end[1] == doctest::Approx(s).epsilon(1e-9));
}

TEST_CASE("2D double well switches wells under noise") {
  const auto tr = simulate_dw2(SimConfig::defaults(ModelKind::dw2));
  int side = 0, switches = 0;
  for (std::size_t t = 0; t < tr.points.size(); ++t) {
    const double x = tr.points[t][0], y = tr.points[t][1];
    const int now = (x > 0.3 && y > 0.3) ? 1 : (x < -0.3 && y < -0.3) ? -1 : 0;
    if (now != 0 && side != 0 && now != side) ++switches;
    if (now != 0) side = now;
  }
  CHECK(switches >= 5);
}

TEST_CASE("branching memberships form a partition of unity") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int n = 0; n < 10'000; ++n) {
    const auto h = branching_memberships(u(rng));
    CHECK(std::abs(h[0] + h[1] + h[2] - 1.0) <= 1e-15);
    CHECK(std::min({h[0], h[1], h[2]}) >= 0.0);
  }
  CHECK(branching_memberships(1.0)[0] == 1.0);
  CHECK(branching_memberships(0.5)[1] == 1.0);
  CHECK(branching_memberships(0.0)[2] == 1.0);
}

TEST_CASE("branching trajectories reach y = 0 and settle near the four minima") {
  const auto c = SimConfig::defaults(ModelKind::branching);
  const auto trs = simulate_branching(c);
  REQUIRE(trs.size() == 100);
  const double theta = 1.0 / (99 * 0.001);
  int near = 0;
  for (const auto& tr : trs) {
    CHECK(tr.points.size() == 100);
    CHECK(tr.points[0][0] == 0.5);
    CHECK(tr.points[0][1] == 1.0);
    const auto end = tr.points[99];
    CHECK(std::abs(end[1]) <= 0.001 * theta);
    const double x = end[0] - std::floor(end[0]);
    double best = 1.0;
    for (double m : {0.125, 0.375, 0.625, 0.875}) best = std::min(best, std::abs(x - m));
    near += best < 0.0625;
  }
  CHECK(near >= 70);
}

TEST_CASE("Lorenz and Rossler fields") {
  const double r = std::sqrt(8.0 / 3.0 * 27.0);
  for (double sign : {1.0, -1.0}) {
    const auto f = lorenz_field({sign * r, sign * r, 27.0}, 10.0, 28.0, 8.0 / 3.0);
    for (double x : f) CHECK(std::abs(x) < 1e-12);
  }
  CHECK(r == doctest::Approx(std::sqrt(72.0)));

  auto c = SimConfig::defaults(ModelKind::rossler);
  c.model = ModelKind::rossler;
  const auto tr = simulate_attractor(c);
  std::vector<double> z(tr.points.size());
  for (std::size_t t = 0; t < z.size(); ++t) z[t] = tr.points[t][2];
  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted[sorted.size() / 2] < 1.0);  // z small most of the time
  CHECK(sorted.back() > 10.0);             // with large spikes
  // the orbit winds around the origin in the x-y plane
  int turns = 0;
  for (std::size_t t = 1; t < tr.points.size(); ++t)
    turns += tr.points[t - 1][1] < 0.0 && tr.points[t][1] >= 0.0 && tr.points[t][0] > 0.0;
  CHECK(turns > 10);
}

TEST_CASE("Lorenz orbit visits both wings after the transient") {
  const auto tr = simulate_attractor(SimConfig::defaults(ModelKind::lorenz));
  CHECK(tr.points.size() == 20'000);
  int left = 0, right = 0;
  for (std::size_t t = 0; t < tr.points.size(); ++t) (tr.points[t][0] < 0 ? left : right)++;
  CHECK(left > 4000);
  CHECK(right > 4000);
  CHECK_THROWS_AS(simulate_attractor(SimConfig::defaults(ModelKind::dw1)), Error);
}

TEST_CASE("RK4 accuracy and order") {
  const double e1 = rk4_error_at_one(0.01);
  CHECK(e1 < 1e-8);
  const double ratio = rk4_error_at_one(0.1) / rk4_error_at_one(0.05);
  CHECK(ratio > 14.0);
  CHECK(ratio < 18.0);
}

TEST_CASE("generators are deterministic per seed and trial") {
  auto c = SimConfig::defaults(ModelKind::dw1);
  c.steps = 500;
  c.seed = 17;
  CHECK(simulate_dw1(c).points.coords() == simulate_dw1(c).points.coords());
  auto d = c;
  d.seed = 18;
  CHECK(simulate_dw1(c).points.coords() != simulate_dw1(d).points.coords());

  auto b = SimConfig::defaults(ModelKind::branching);
  b.trials = 3;
  const auto few = simulate_branching(b);
  b.trials = 6;
  const auto more = simulate_branching(b);
  for (std::size_t m = 0; m < 3; ++m) CHECK(few[m].points.coords() == more[m].points.coords());
  CHECK(few[0].points.coords() != few[1].points.coords());
  CHECK(few[2].individual == "3");

  c.trials = 2;
  const auto both = simulate(c);
  REQUIRE(both.size() == 2);
  CHECK(both[0].points.coords() == simulate_dw1(c).points.coords());
}
