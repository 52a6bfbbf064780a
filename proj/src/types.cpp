#include "mcsc/types.hpp"

#include <cmath>
#include <string>

#include "mcsc/error.hpp"

namespace mcsc {

TransitionMatrix::TransitionMatrix(Matrix entries, double tolerance)
    : entries_(std::move(entries)) {
  if (entries_.rows() != entries_.cols() || entries_.rows() == 0)
    throw Error(ErrorCode::dimension_mismatch, "transition matrix must be square and non-empty");
  for (Eigen::Index i = 0; i < entries_.cols(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < entries_.rows(); ++j) {
      const double v = entries_(j, i);
      if (!std::isfinite(v))
        throw Error(ErrorCode::non_finite, "transition matrix has a non-finite entry");
      if (v < 0.0)
        throw Error(ErrorCode::invalid_argument,
                    "transition matrix has a negative entry in column " + std::to_string(i + 1));
      s += v;
    }
    if (std::abs(s - 1.0) > tolerance)
      throw Error(ErrorCode::invalid_argument,
                  "column " + std::to_string(i + 1) + " of transition matrix sums to " +
                      std::to_string(s));
  }
}

TransitionMatrix TransitionMatrix::identity(std::size_t k) {
  const auto n = static_cast<Eigen::Index>(k);
  return TransitionMatrix(Matrix::Identity(n, n));
}

Distribution::Distribution(Vector z, double tolerance) : z_(std::move(z)) {
  if (z_.size() == 0) throw Error(ErrorCode::dimension_mismatch, "empty distribution");
  double s = 0.0;
  for (Eigen::Index i = 0; i < z_.size(); ++i) {
    if (!std::isfinite(z_(i))) throw Error(ErrorCode::non_finite, "distribution has a non-finite entry");
    if (z_(i) < 0.0) throw Error(ErrorCode::invalid_argument, "distribution has a negative entry");
    s += z_(i);
  }
  if (std::abs(s - 1.0) > tolerance)
    throw Error(ErrorCode::invalid_argument, "distribution sums to " + std::to_string(s));
}

Distribution Distribution::uniform(std::size_t k) {
  const auto n = static_cast<Eigen::Index>(k);
  return Distribution(Vector::Constant(n, 1.0 / static_cast<double>(k)));
}

Distribution Distribution::point_mass(std::size_t k, std::size_t state) {
  Vector z = Vector::Zero(static_cast<Eigen::Index>(k));
  z(static_cast<Eigen::Index>(state)) = 1.0;
  return Distribution(std::move(z));
}

Distribution Distribution::normalized(Vector z) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    if (!std::isfinite(z(i))) throw Error(ErrorCode::non_finite, "distribution has a non-finite entry");
    if (z(i) < 0.0) z(i) = 0.0;
    s += z(i);
  }
  if (!(s > 0.0)) throw Error(ErrorCode::invalid_argument, "distribution has zero mass");
  z /= s;
  return Distribution(std::move(z));
}

void DistributionSeries::validate() const {
  if (times.size() != points.size())
    throw Error(ErrorCode::dimension_mismatch, "distribution series: times and points differ in length");
  for (std::size_t t = 1; t < times.size(); ++t)
    if (!(times[t] > times[t - 1]))
      throw Error(ErrorCode::invalid_argument, "distribution series: times must strictly increase");
  for (const auto& p : points)
    if (p.size() != states())
      throw Error(ErrorCode::dimension_mismatch, "distribution series: inconsistent state count");
}

PointSet::PointSet(std::size_t dim, std::vector<double> coords)
    : dim_(dim), coords_(std::move(coords)) {
  if (dim_ == 0) throw Error(ErrorCode::dimension_mismatch, "point dimension must be positive");
  if (coords_.size() % dim_ != 0)
    throw Error(ErrorCode::dimension_mismatch, "coordinate count is not a multiple of the dimension");
}

void PointSet::push_back(std::span<const double> p) {
  if (p.size() != dim_) throw Error(ErrorCode::dimension_mismatch, "point dimension mismatch");
  coords_.insert(coords_.end(), p.begin(), p.end());
}

}  // namespace mcsc
