#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mcsc/chain.hpp"
#include "mcsc/control.hpp"
#include "mcsc/error.hpp"
#include "mcsc/geometry.hpp"
#include "mcsc/models.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mcsc;
using namespace mcsc::control;

namespace {

TransitionMatrix two_state() {
  Matrix m(2, 2);
  m << 0.9, 0.2, 0.1, 0.8;
  return TransitionMatrix(m);
}

Vector vec(std::initializer_list<double> v) {
  Vector z(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) z(i++) = x;
  return z;
}

TransitionMatrix random_damped(std::size_t k, std::mt19937_64& rng, double sparsity = 0.5) {
  return chain::apply_damping(TransitionMatrix(testing::random_stochastic(k, rng, sparsity)), 1e-4);
}

Vector random_reward(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Vector r(static_cast<Eigen::Index>(k));
  for (auto& x : r) x = u(rng);
  return r;
}

void check_plan_invariants(const TransitionMatrix& a, const ControlPlan& plan) {
  const Matrix p = a.matrix() + plan.delta;
  for (Eigen::Index c = 0; c < p.cols(); ++c) {
    CHECK(std::abs(plan.delta.col(c).sum()) <= 1e-12);
    CHECK(p.col(c).minCoeff() >= 0.0);
    CHECK(std::abs(p.col(c).sum() - 1.0) <= 1e-12);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      if (r == c) continue;
      CHECK(plan.delta(r, c) <= 0.0);
      if (plan.delta(r, c) < 0.0) CHECK(plan.delta(c, c) > 0.0);
    }
  }
  for (std::size_t n = 1; n < plan.objective_trace.size(); ++n)
    CHECK(plan.objective_trace[n] > plan.objective_trace[n - 1]);
}

}  // namespace

TEST_CASE("objective without a plan is the expected stationary reward") {
  std::mt19937_64 rng(1);
  const auto a = random_damped(6, rng);
  const Vector r = random_reward(6, rng);
  ControlConfig cfg;
  cfg.lambda1 = 0.3;
  cfg.lambda2 = 0.7;
  const auto t = objective_terms(a, Matrix::Zero(6, 6), r, cfg);
  CHECK(t.nonzeros == 0);
  CHECK(t.log_fold == 0.0);
  CHECK(t.value == doctest::Approx(r.dot(testing::eigen_stationary(a.matrix()))).epsilon(1e-12));
}

TEST_CASE("objective on the two-state example") {
  const auto a = two_state();
  Matrix delta = Matrix::Zero(2, 2);
  delta(1, 0) = -0.05;
  delta(0, 0) = 0.05;
  ControlConfig cfg;
  cfg.lambda1 = 0.02;
  cfg.lambda2 = 0.03;
  const auto t = objective_terms(a, delta, vec({1, -1}), cfg);
  // new chain [[0.95, 0.2], [0.05, 0.8]] -> z* = (0.8, 0.2)
  const Vector z = testing::two_state_stationary(0.05, 0.2);
  CHECK(z(0) == doctest::Approx(0.8));
  CHECK(t.reward == doctest::Approx(0.6).epsilon(1e-14));
  CHECK(t.nonzeros == 2);
  const double fold = std::abs(std::log(0.5)) + std::abs(std::log(0.95 / 0.9));
  CHECK(t.log_fold == doctest::Approx(fold).epsilon(1e-14));
  CHECK(t.value == doctest::Approx(0.6 - 2 * 0.02 - 0.03 * fold).epsilon(1e-14));
}

TEST_CASE("uniform reward is blind to the plan") {
  std::mt19937_64 rng(2);
  const auto a = random_damped(5, rng);
  Matrix delta = Matrix::Zero(5, 5);
  apply_suppression(a, delta, {1, 3}, 0.8);
  apply_suppression(a, delta, {4, 0}, 0.5);
  ControlConfig cfg;
  CHECK(objective_terms(a, delta, Vector::Constant(5, 2.5), cfg).reward == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("driving a positive transition to zero is a log divergence") {
  const auto a = two_state();
  Matrix delta = Matrix::Zero(2, 2);
  apply_suppression(a, delta, {0, 1}, 1.0);
  try {
    objective(a, delta, vec({1, 0}), ControlConfig{});
    FAIL("accepted a zeroed transition");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::log_divergence);
  }
}

TEST_CASE("finite-horizon objective uses tau - 1 steps from z(1)") {
  const auto a = two_state();
  ControlConfig cfg;
  cfg.horizon = Horizon::finite(3, vec({0, 1}));
  // z(3) = A^2 (0, 1)
  const Vector z3 = a.matrix() * (a.matrix() * vec({0, 1}));
  CHECK(objective(a, Matrix::Zero(2, 2), vec({1, 0}), cfg) == doctest::Approx(z3(0)).epsilon(1e-15));
  cfg.horizon = Horizon::finite(1, vec({0.25, 0.75}));
  CHECK(objective(a, Matrix::Zero(2, 2), vec({1, 0}), cfg) == doctest::Approx(0.25));
}

TEST_CASE("candidate set") {
  const Matrix two = two_state().matrix();
  CHECK(candidate_set(two, 1.0).size() == 2);
  std::mt19937_64 rng(3);
  const Matrix big = testing::random_stochastic(20, rng);
  CHECK(candidate_set(big, 0.2).size() == 76);

  // equal off-diagonals: lexicographic (row, column) = (to, from)
  const Matrix flat = Matrix::Constant(4, 4, 0.25);
  const auto c = candidate_set(flat, 0.25);  // ceil(0.25 * 12) = 3
  REQUIRE(c.size() == 3);
  CHECK(c[0] == Site{1, 0});
  CHECK(c[1] == Site{2, 0});
  CHECK(c[2] == Site{3, 0});

  // ranked by value, zero entries never offered
  Matrix m(3, 3);
  m << 0.5, 0.0, 0.1, 0.2, 0.6, 0.0, 0.3, 0.4, 0.9;
  const auto all = candidate_set(m, 1.0);
  REQUIRE(all.size() == 4);
  CHECK(all[0] == Site{1, 2});  // 0.4
  CHECK(all[1] == Site{0, 2});  // 0.3
  CHECK(all[2] == Site{0, 1});  // 0.2
  CHECK(all[3] == Site{2, 0});  // 0.1

  // flow ranking weights column i by z_i
  const Vector z = vec({0.1, 0.1, 0.8});
  const auto flow = candidate_set(m, 1.0, CandidateRanking::flow, &z);
  CHECK(flow[0] == Site{2, 0});  // 0.8 * 0.1
  CHECK(flow[1] == Site{1, 2});  // 0.1 * 0.4
  CHECK_THROWS_AS(candidate_set(m, 1.0, CandidateRanking::flow), Error);
  CHECK_THROWS_AS(candidate_set(m, 0.0), Error);
}

TEST_CASE("apply suppression") {
  Matrix m(2, 2);
  m << 0.6, 0.3, 0.4, 0.7;
  const TransitionMatrix a(m);
  Matrix delta = Matrix::Zero(2, 2);
  apply_suppression(a, delta, {0, 1}, 0.5);
  CHECK(delta(1, 0) == doctest::Approx(-0.2));
  CHECK(delta(0, 0) == doctest::Approx(0.2));
  apply_suppression(a, delta, {0, 1}, 0.5);
  CHECK(a(1, 0) + delta(1, 0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(std::abs(delta.col(0).sum()) < 1e-16);
  CHECK_THROWS_AS(apply_suppression(a, delta, {0, 0}, 0.5), Error);

  Matrix z(2, 2);
  z << 1.0, 0.3, 0.0, 0.7;
  Matrix d2 = Matrix::Zero(2, 2);
  CHECK_THROWS_AS(apply_suppression(TransitionMatrix(z), d2, {0, 1}, 0.5), Error);

  std::mt19937_64 rng(4);
  const auto r = random_damped(8, rng);
  Matrix acc = Matrix::Zero(8, 8);
  std::uniform_int_distribution<std::size_t> pick(0, 7);
  for (int n = 0; n < 100; ++n) {
    const Site s{pick(rng), pick(rng)};
    if (s.from == s.to) continue;
    apply_suppression(r, acc, s, 0.3);
  }
  for (Eigen::Index c = 0; c < 8; ++c) CHECK(std::abs(acc.col(c).sum()) < 1e-15);
  CHECK((r.matrix() + acc).minCoeff() >= 0.0);
}

TEST_CASE("move evaluator agrees with the full objective") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t k = 3 + static_cast<std::size_t>(trial);
    const auto a = random_damped(k, rng);
    const Vector r = random_reward(k, rng);
    ControlConfig cfg;
    cfg.lambda1 = 0.01;
    cfg.lambda2 = 0.02;
    if (trial % 2 == 1) cfg.horizon = Horizon::finite(2 + static_cast<std::size_t>(trial) * 3, testing::random_simplex(k, rng));
    // a nonzero starting plan
    Matrix delta = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    apply_suppression(a, delta, {0, 1}, 0.5);
    apply_suppression(a, delta, {2, 0}, 0.8);
    const MoveEvaluator eval(a, delta, r, cfg);
    CHECK(eval.base_value() == doctest::Approx(objective(a, delta, r, cfg)).epsilon(1e-12));
    for (std::size_t from = 0; from < k; ++from)
      for (std::size_t to = 0; to < k; ++to) {
        if (from == to) continue;
        for (double h : {0.1, 0.5, 0.9}) {
          Matrix trial_delta = delta;
          apply_suppression(a, trial_delta, {from, to}, h);
          const double full = objective(a, trial_delta, r, cfg);
          CHECK(std::abs(eval.value_after({from, to}, h) - full) <= 1e-12);
        }
      }
  }
}

TEST_CASE("an unhelpful reward yields an empty plan") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t k = 3 + static_cast<std::size_t>(trial % 8);
    const auto a = random_damped(k, rng);
    const Vector r = random_reward(k, rng);
    ControlConfig cfg;
    cfg.lambda1 = 0.5 * (r.maxCoeff() - r.minCoeff()) * 1.0001;
    cfg.lambda2 = 0.0;
    const auto plan = greedy_optimize(a, r, cfg);
    CHECK(plan.interventions.empty());
    CHECK(plan.delta.isZero(0.0));
    CHECK(plan.objective_trace.size() == 1);
  }
}

TEST_CASE("greedy plans satisfy the plan invariants") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> lam(0.0, 0.02);
  for (int trial = 0; trial < 15; ++trial) {
    const std::size_t k = 3 + static_cast<std::size_t>(trial);
    const auto a = random_damped(k, rng, 0.6);
    const Vector r = random_reward(k, rng);
    ControlConfig cfg;
    cfg.lambda1 = lam(rng);
    cfg.lambda2 = lam(rng);
    if (trial % 3 == 2) cfg.horizon = Horizon::finite(10, testing::random_simplex(k, rng));
    const auto plan = greedy_optimize(a, r, cfg);
    check_plan_invariants(a, plan);
    CHECK(plan.objective_trace.back() == doctest::Approx(objective(a, plan.delta, r, cfg)).epsilon(1e-12));
    // suppression only: no off-diagonal effective entry grows
    const Matrix p = a.matrix() + plan.delta;
    for (Eigen::Index c = 0; c < p.cols(); ++c)
      for (Eigen::Index rr = 0; rr < p.rows(); ++rr)
        if (rr != c) CHECK(p(rr, c) <= a.matrix()(rr, c));
    // interventions read back from delta
    CHECK(plan.interventions.size() == interventions_of(a, plan.delta).size());
  }
}

TEST_CASE("greedy matches exhaustive search on three-state chains") {
  std::mt19937_64 rng(8);
  int compared = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const auto a = random_damped(3, rng, 0.0);
    const Vector r = random_reward(3, rng);
    ControlConfig cfg;
    cfg.lambda1 = 0.01;
    cfg.lambda2 = 0.05;
    cfg.candidate_fraction = 1.0;
    cfg.max_iterations = 1;
    const auto plan = greedy_optimize(a, r, cfg);
    const auto best = oracle::best_single_move(a, r, cfg, true);
    const auto unscreened = oracle::best_single_move(a, r, cfg, false);
    // the probe screen can only discard moves
    CHECK(unscreened.value >= best.value);
    if (!best.found || best.value <= plan.objective_trace.front()) {
      CHECK(plan.interventions.empty());
      continue;
    }
    REQUIRE(plan.interventions.size() == 1);
    ++compared;
    CHECK(std::abs(plan.objective_trace.back() - best.value) <= 1e-12);
    CHECK(plan.interventions.front().site == best.site);
    CHECK(plan.interventions.front().cumulative_suppression == doctest::Approx(best.h).epsilon(1e-12));
  }
  CHECK(compared >= 20);
}

TEST_CASE("joint scaling of reward and penalties leaves the plan unchanged") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = random_damped(8, rng);
    const Vector r = random_reward(8, rng);
    ControlConfig cfg;
    cfg.lambda1 = 0.002;
    cfg.lambda2 = 0.004;
    const auto p1 = greedy_optimize(a, r, cfg);
    // powers of two keep every product exact
    ControlConfig scaled = cfg;
    scaled.lambda1 *= 4.0;
    scaled.lambda2 *= 4.0;
    const auto p2 = greedy_optimize(a, 4.0 * r, scaled);
    REQUIRE(p1.interventions.size() == p2.interventions.size());
    for (std::size_t n = 0; n < p1.interventions.size(); ++n) {
      CHECK(p1.interventions[n].site == p2.interventions[n].site);
      CHECK(p1.interventions[n].cumulative_suppression == p2.interventions[n].cumulative_suppression);
    }
  }
}

TEST_CASE("simulate controlled") {
  std::mt19937_64 rng(10);
  const auto a = random_damped(5, rng);
  const Distribution z0(testing::random_simplex(5, rng));
  const auto free = chain::evolve(a, z0, 20);
  const auto same = simulate_controlled(a, Matrix::Zero(5, 5), z0, 20);
  for (std::size_t t = 0; t <= 20; ++t) CHECK(free.points[t].vector() == same.points[t].vector());

  // suppress the only exit of state 1 almost completely: mass accumulates there
  const auto two = two_state();
  Matrix delta = Matrix::Zero(2, 2);
  apply_suppression(two, delta, {0, 1}, 0.99);
  const auto run = simulate_controlled(two, delta, Distribution::point_mass(2, 1), 400);
  CHECK(run.points.back()[0] > 0.99);
  CHECK(run.points.back()[0] > chain::evolve(two, Distribution::point_mass(2, 1), 400).points.back()[0]);
}

TEST_CASE("config validation") {
  ControlConfig cfg;
  CHECK_NOTHROW(cfg.validate(4));
  cfg.suppression_levels = {};
  CHECK_THROWS_AS(cfg.validate(4), Error);
  cfg.suppression_levels = {1.0};
  CHECK_THROWS_AS(cfg.validate(4), Error);
  cfg.suppression_levels = {0.5};
  cfg.lambda1 = -1;
  CHECK_THROWS_AS(cfg.validate(4), Error);
  cfg.lambda1 = 0;
  cfg.horizon = Horizon::finite(5, Vector::Constant(3, 1.0 / 3));
  CHECK_THROWS_AS(cfg.validate(4), Error);
}

TEST_CASE("double-well saddle control") {
  auto sim = models::SimConfig::defaults(models::ModelKind::dw1);
  const auto tr = models::simulate_dw1(sim);
  const std::size_t bins[] = {20};
  const auto part = geometry::partition_per_axis(tr.points, bins, geometry::EdgeRule::quantile);
  const auto labels = part.labels(tr.points);
  std::vector<chain::Observation> obs;
  for (std::size_t t = 0; t < labels.size(); ++t) obs.push_back({"1", static_cast<std::int64_t>(t), labels[t]});
  const auto a = chain::apply_damping(chain::estimate_relative_frequency(chain::extract_events(chain::LabeledSeries(obs, 20))), 1e-10);
  Vector r(20);
  for (Eigen::Index i = 0; i < 20; ++i) r(i) = i < 10 ? 1.0 : -1.0;

  ControlConfig strong;
  strong.lambda1 = strong.lambda2 = 0.1;
  const auto one = greedy_optimize(a, r, strong);
  REQUIRE(one.interventions.size() == 1);
  const auto s = one.interventions.front().site;
  CHECK(std::abs(static_cast<long>(s.from) - static_cast<long>(s.to)) == 1);
  CHECK(s.from + 1 >= 7);
  CHECK(s.from + 1 <= 12);
  check_plan_invariants(a, one);

  ControlConfig weak;
  weak.lambda1 = weak.lambda2 = 0.01;
  const auto many = greedy_optimize(a, r, weak);
  const auto z = controlled_distribution(a, many.delta, weak.horizon);
  CHECK(z.vector().head(10).sum() > 0.9);
}
