#pragma once

// State-space discretization: a Partition maps points of R^N to labels 1..K.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mcsc/types.hpp"

namespace mcsc::geometry {

enum class PartitionKind { per_axis, representatives };
enum class EdgeRule { quantile, uniform_range };
enum class Metric { euclidean };

class Partition {
 public:
  // edges[d] holds bins_d + 1 strictly increasing boundaries for axis d.
  static Partition per_axis(std::vector<std::vector<double>> edges);
  // K distinct representative points; cells are their Voronoi regions.
  static Partition voronoi(PointSet representatives, Metric metric = Metric::euclidean);

  PartitionKind kind() const noexcept { return kind_; }
  std::size_t states() const noexcept { return states_; }
  std::size_t dim() const noexcept { return dim_; }
  Metric metric() const noexcept { return metric_; }

  // 0-based cell index; label() is index + 1.
  std::size_t index_of(std::span<const double> point) const;
  int label(std::span<const double> point) const {
    return static_cast<int>(index_of(point)) + 1;
  }
  std::vector<int> labels(const PointSet& points) const;

  // Representative points, or per-axis cell centers.
  PointSet centers() const;

  const std::vector<std::vector<double>>& edges() const noexcept { return edges_; }
  const PointSet& representatives() const noexcept { return representatives_; }

  // Mixed-radix label coding for per-axis partitions, axis 0 most significant.
  // Bin indices are 0-based, labels 1-based.
  int encode(std::span<const std::size_t> bins) const;
  std::vector<std::size_t> decode(int label) const;

 private:
  PartitionKind kind_ = PartitionKind::per_axis;
  std::size_t states_ = 0;
  std::size_t dim_ = 0;
  Metric metric_ = Metric::euclidean;
  std::vector<std::vector<double>> edges_;
  PointSet representatives_;
  std::vector<double> centers_by_dim_;  // representatives, dimension-major
};

// Symmetric, zero-diagonal K x K matrix of distances between cell centers.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(Matrix d);

  std::size_t size() const noexcept { return static_cast<std::size_t>(d_.rows()); }
  const Matrix& matrix() const noexcept { return d_; }
  double operator()(std::size_t i, std::size_t j) const {
    return d_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

 private:
  Matrix d_;
};

Partition partition_per_axis(const PointSet& points, std::span<const std::size_t> bins_per_axis,
                             EdgeRule rule);

struct AxisRange {
  double lo;
  double hi;
};
// Uniform bins over explicit bounds; no data needed.
Partition partition_uniform(std::span<const AxisRange> bounds,
                            std::span<const std::size_t> bins_per_axis);

struct KMeansFit {
  Partition partition;
  std::vector<double> inertia_trace;  // inertia after each assignment step
  std::size_t iterations = 0;
  bool converged = false;
};

// Lloyd's algorithm from k-means++ seeding. Empty clusters are reseeded with
// the point farthest from its current center.
KMeansFit kmeans(const PointSet& points, std::size_t k, std::uint64_t seed,
                 std::size_t max_iter = 300);
inline Partition fit_kmeans(const PointSet& points, std::size_t k, std::uint64_t seed,
                            std::size_t max_iter = 300) {
  return kmeans(points, k, seed, max_iter).partition;
}

// K distinct data points drawn uniformly without replacement, kept in data order.
Partition sample_representatives(const PointSet& points, std::size_t k, std::uint64_t seed);

DistanceMatrix pairwise_distances(const Partition& partition);

std::size_t distinct_count(const PointSet& points);

}  // namespace mcsc::geometry
