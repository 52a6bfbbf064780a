#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

namespace mcsc {

using Matrix = Eigen::MatrixXd;  // column-major
using Vector = Eigen::VectorXd;

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<double> as_span(Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}
inline std::span<const double> as_span(const Matrix& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

// K x K column-stochastic matrix. Entry (j, i) is the probability of moving
// from state i to state j in one step, so column i is the outgoing
// distribution of state i.
class TransitionMatrix {
 public:
  static constexpr double kColumnSumTolerance = 1e-12;

  TransitionMatrix() = default;
  // Throws mcsc::Error unless square, finite, nonnegative and column sums are
  // within `tolerance` of 1.
  explicit TransitionMatrix(Matrix entries, double tolerance = kColumnSumTolerance);

  std::size_t size() const noexcept { return static_cast<std::size_t>(entries_.rows()); }
  const Matrix& matrix() const noexcept { return entries_; }
  double operator()(std::size_t to, std::size_t from) const {
    return entries_(static_cast<Eigen::Index>(to), static_cast<Eigen::Index>(from));
  }

  static TransitionMatrix identity(std::size_t k);

 private:
  Matrix entries_;
};

// Point of the probability simplex.
class Distribution {
 public:
  static constexpr double kSumTolerance = 1e-12;

  Distribution() = default;
  explicit Distribution(Vector z, double tolerance = kSumTolerance);

  std::size_t size() const noexcept { return static_cast<std::size_t>(z_.size()); }
  const Vector& vector() const noexcept { return z_; }
  double operator[](std::size_t i) const { return z_(static_cast<Eigen::Index>(i)); }

  static Distribution uniform(std::size_t k);
  static Distribution point_mass(std::size_t k, std::size_t state);
  // Clamps entries below zero (rounding residue) and rescales to sum 1.
  static Distribution normalized(Vector z);

 private:
  Vector z_;
};

struct DistributionSeries {
  std::vector<double> times;
  std::vector<Distribution> points;

  std::size_t size() const noexcept { return points.size(); }
  std::size_t states() const noexcept { return points.empty() ? 0 : points.front().size(); }
  // Throws unless lengths agree, times strictly increase and sizes match.
  void validate() const;
};

// Row-major list of points in R^dim.
class PointSet {
 public:
  PointSet() = default;
  PointSet(std::size_t dim, std::vector<double> coords);
  explicit PointSet(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  bool empty() const noexcept { return coords_.empty(); }
  std::span<const double> operator[](std::size_t i) const {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<double> operator[](std::size_t i) { return {coords_.data() + i * dim_, dim_}; }
  const std::vector<double>& coords() const noexcept { return coords_; }
  void push_back(std::span<const double> p);

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

}  // namespace mcsc
