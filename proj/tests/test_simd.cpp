#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mcsc/simd/kernels.hpp"

using namespace mcsc::simd;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

std::vector<Backend> vector_backends() {
  std::vector<Backend> out;
  for (Backend b : {Backend::avx2, Backend::neon})
    if (supported(b)) out.push_back(b);
  return out;
}

}  // namespace

TEST_CASE("scalar backend is always available") {
  CHECK(supported(Backend::scalar));
  CHECK(table(Backend::scalar).backend == Backend::scalar);
  CHECK(to_string(Backend::scalar) == "scalar");
}

TEST_CASE("scalar kernels on hand-sized inputs") {
  const auto& k = table(Backend::scalar);
  // column-major 2x3: [[1,3,5],[2,4,6]]
  const double a[] = {1, 2, 3, 4, 5, 6};
  const double x[] = {1, 1, 1};
  double y[2];
  k.matvec(a, 2, 3, x, y);
  CHECK(y[0] == 9);
  CHECK(y[1] == 12);
  const double u[] = {1, 2};
  double w[3];
  k.matvec_transposed(a, 2, 3, u, w);
  CHECK(w[0] == 5);
  CHECK(w[1] == 11);
  CHECK(w[2] == 17);

  const double p[] = {3, 4};
  const double q[] = {0, 0};
  CHECK(k.squared_distance(p, q, 2) == 25);
  CHECK(k.l1_distance(p, q, 2) == 7);
  CHECK(k.dot(p, p, 2) == 25);
  CHECK(k.sum(p, 2) == 7);

  // centers {0, 1} in 1D; 0.5 is a tie and goes to the lower index
  const double c[] = {0.0, 1.0};
  const double pt[] = {0.5};
  double best = 0;
  CHECK(k.nearest(c, 2, 1, pt, &best) == 0);
  CHECK(best == 0.25);
}

TEST_CASE("vector kernels agree with the scalar reference") {
  const auto& ref = table(Backend::scalar);
  std::mt19937_64 rng(42);
  for (Backend b : vector_backends()) {
    CAPTURE(to_string(b));
    const auto& k = table(b);
    for (std::size_t rows : {1u, 3u, 4u, 7u, 16u, 33u}) {
      for (std::size_t cols : {1u, 2u, 5u, 9u, 20u}) {
        auto a = random_values(rows * cols, rng);
        auto x = random_values(cols, rng);
        auto xt = random_values(rows, rng);
        std::vector<double> y0(rows), y1(rows), w0(cols), w1(cols);
        ref.matvec(a.data(), rows, cols, x.data(), y0.data());
        k.matvec(a.data(), rows, cols, x.data(), y1.data());
        CHECK(y0 == y1);  // element-wise: bit-identical
        ref.matvec_transposed(a.data(), rows, cols, xt.data(), w0.data());
        k.matvec_transposed(a.data(), rows, cols, xt.data(), w1.data());
        for (std::size_t i = 0; i < cols; ++i) CHECK(w1[i] == doctest::Approx(w0[i]).epsilon(1e-13));
      }
    }
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 8u, 31u, 100u}) {
      auto p = random_values(n, rng);
      auto q = random_values(n, rng);
      auto y0 = q, y1 = q;
      ref.axpy(0.37, p.data(), y0.data(), n);
      k.axpy(0.37, p.data(), y1.data(), n);
      CHECK(y0 == y1);
      CHECK(k.dot(p.data(), q.data(), n) == doctest::Approx(ref.dot(p.data(), q.data(), n)).epsilon(1e-13));
      CHECK(k.sum(p.data(), n) == doctest::Approx(ref.sum(p.data(), n)).epsilon(1e-13));
      CHECK(k.l1_distance(p.data(), q.data(), n) ==
            doctest::Approx(ref.l1_distance(p.data(), q.data(), n)).epsilon(1e-13));
      CHECK(k.squared_distance(p.data(), q.data(), n) ==
            doctest::Approx(ref.squared_distance(p.data(), q.data(), n)).epsilon(1e-13));
    }
    for (std::size_t dim : {1u, 2u, 3u, 5u}) {
      for (std::size_t kc : {1u, 2u, 4u, 7u, 50u}) {
        auto centers = random_values(dim * kc, rng);
        for (int trial = 0; trial < 20; ++trial) {
          auto pt = random_values(dim, rng);
          double b0 = 0, b1 = 0;
          CHECK(ref.nearest(centers.data(), kc, dim, pt.data(), &b0) ==
                k.nearest(centers.data(), kc, dim, pt.data(), &b1));
          CHECK(b0 == b1);
        }
      }
    }
  }
}

TEST_CASE("nearest breaks exact ties toward the lowest index in every backend") {
  // four identical centers, dimension-major
  const double c[] = {1, 1, 1, 1, 2, 2, 2, 2};
  const double pt[] = {0, 0};
  for (Backend b : {Backend::scalar, Backend::avx2, Backend::neon}) {
    if (!supported(b)) continue;
    CHECK(table(b).nearest(c, 4, 2, pt, nullptr) == 0);
  }
}

TEST_CASE("backend can be switched at runtime") {
  const Backend before = active_backend();
  set_backend(Backend::scalar);
  CHECK(active_backend() == Backend::scalar);
  const double a[] = {1, 2};
  CHECK(sum(std::span<const double>(a, 2)) == 3);
  set_backend(before);
  CHECK(active_backend() == before);
}
