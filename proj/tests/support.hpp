#pragma once

// Shared generators and independent reference computations for the tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "mcsc/types.hpp"

namespace testing {

using mcsc::Matrix;
using mcsc::Vector;

// Random column-stochastic matrix; each entry is zeroed with probability
// sparsity, and every column keeps at least its diagonal.
inline Matrix random_stochastic(std::size_t k, std::mt19937_64& rng, double sparsity = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      m(r, c) = (r != c && u(rng) < sparsity) ? 0.0 : u(rng);
      s += m(r, c);
    }
    if (s == 0.0) {
      m(c, c) = 1.0;
      s = 1.0;
    }
    m.col(c) /= s;
  }
  return m;
}

inline Vector random_simplex(std::size_t k, std::mt19937_64& rng) {
  std::exponential_distribution<double> e(1.0);
  Vector v(static_cast<Eigen::Index>(k));
  for (auto& x : v) x = e(rng);
  return v / v.sum();
}

// Stationary distribution from the eigenvector of eigenvalue 1, a route that
// shares nothing with power iteration or the reduced linear system.
inline Vector eigen_stationary(const Matrix& a) {
  Eigen::EigenSolver<Matrix> es(a);
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < a.rows(); ++i)
    if (std::abs(es.eigenvalues()(i) - 1.0) < std::abs(es.eigenvalues()(best) - 1.0)) best = i;
  Vector v = es.eigenvectors().col(best).real();
  return v / v.sum();
}

// Exact stationary distribution of a 2-state chain [[1-p, q], [p, 1-q]].
inline Vector two_state_stationary(double p, double q) {
  Vector z(2);
  z << q / (p + q), p / (p + q);
  return z;
}

// Fresh directory under the system temp path, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mcsc-" + tag + "-" + std::to_string(rd()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
