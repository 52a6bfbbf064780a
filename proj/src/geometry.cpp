#include "mcsc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "mcsc/error.hpp"
#include "mcsc/simd/kernels.hpp"

namespace mcsc::geometry {
namespace {

void require_finite(std::span<const double> p) {
  for (double v : p)
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite, "point has a non-finite coordinate");
}

std::vector<double> dimension_major(const PointSet& pts) {
  const std::size_t k = pts.size();
  const std::size_t dim = pts.dim();
  std::vector<double> out(k * dim);
  for (std::size_t c = 0; c < k; ++c)
    for (std::size_t d = 0; d < dim; ++d) out[d * k + c] = pts[c][d];
  return out;
}

std::vector<std::size_t> distinct_indices(const PointSet& points) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  auto less = [&](std::size_t a, std::size_t b) {
    const auto pa = points[a];
    const auto pb = points[b];
    if (std::lexicographical_compare(pa.begin(), pa.end(), pb.begin(), pb.end())) return true;
    if (std::lexicographical_compare(pb.begin(), pb.end(), pa.begin(), pa.end())) return false;
    return a < b;
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<std::size_t> keep;
  for (std::size_t n = 0; n < order.size(); ++n) {
    if (n > 0) {
      const auto prev = points[order[n - 1]];
      const auto cur = points[order[n]];
      if (std::equal(prev.begin(), prev.end(), cur.begin())) continue;
    }
    keep.push_back(order[n]);
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

double quantile_sorted(const std::vector<double>& v, double p) {
  const double h = static_cast<double>(v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= v.size()) return v.back();
  return v[lo] + (h - static_cast<double>(lo)) * (v[lo + 1] - v[lo]);
}

void check_edges(const std::vector<double>& e, std::size_t axis) {
  if (e.size() < 2)
    throw Error(ErrorCode::invalid_argument, "axis " + std::to_string(axis) + " needs at least two edges");
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!std::isfinite(e[i])) throw Error(ErrorCode::non_finite, "non-finite bin edge");
    if (i > 0 && !(e[i] > e[i - 1]))
      throw Error(ErrorCode::insufficient_data,
                  "bin edges on axis " + std::to_string(axis) +
                      " are not strictly increasing (too many tied values for the bin count)");
  }
}

}  // namespace

Partition Partition::per_axis(std::vector<std::vector<double>> edges) {
  if (edges.empty()) throw Error(ErrorCode::invalid_argument, "per-axis partition needs at least one axis");
  Partition p;
  p.kind_ = PartitionKind::per_axis;
  p.dim_ = edges.size();
  p.states_ = 1;
  for (std::size_t d = 0; d < edges.size(); ++d) {
    check_edges(edges[d], d);
    p.states_ *= edges[d].size() - 1;
  }
  p.edges_ = std::move(edges);
  return p;
}

Partition Partition::voronoi(PointSet representatives, Metric metric) {
  if (representatives.empty())
    throw Error(ErrorCode::invalid_argument, "voronoi partition needs at least one representative");
  for (std::size_t c = 0; c < representatives.size(); ++c) require_finite(representatives[c]);
  if (distinct_count(representatives) != representatives.size())
    throw Error(ErrorCode::invalid_argument, "representative points must be distinct");
  Partition p;
  p.kind_ = PartitionKind::representatives;
  p.dim_ = representatives.dim();
  p.states_ = representatives.size();
  p.metric_ = metric;
  p.centers_by_dim_ = dimension_major(representatives);
  p.representatives_ = std::move(representatives);
  return p;
}

std::size_t Partition::index_of(std::span<const double> point) const {
  if (point.size() != dim_)
    throw Error(ErrorCode::dimension_mismatch,
                "point has dimension " + std::to_string(point.size()) + ", partition expects " +
                    std::to_string(dim_));
  require_finite(point);
  if (kind_ == PartitionKind::representatives)
    return simd::nearest(centers_by_dim_, states_, point);

  std::size_t index = 0;
  for (std::size_t d = 0; d < dim_; ++d) {
    const auto& e = edges_[d];
    const std::size_t bins = e.size() - 1;
    // Interior edges only, so outside points clamp to the boundary bins.
    const auto it = std::upper_bound(e.begin() + 1, e.end() - 1, point[d]);
    const auto bin = static_cast<std::size_t>(it - (e.begin() + 1));
    index = index * bins + bin;
  }
  return index;
}

std::vector<int> Partition::labels(const PointSet& points) const {
  std::vector<int> out(points.size());
  for (std::size_t n = 0; n < points.size(); ++n) out[n] = label(points[n]);
  return out;
}

PointSet Partition::centers() const {
  if (kind_ == PartitionKind::representatives) return representatives_;
  PointSet out(dim_);
  std::vector<double> c(dim_);
  for (std::size_t k = 0; k < states_; ++k) {
    const auto bins = decode(static_cast<int>(k) + 1);
    for (std::size_t d = 0; d < dim_; ++d) c[d] = 0.5 * (edges_[d][bins[d]] + edges_[d][bins[d] + 1]);
    out.push_back(c);
  }
  return out;
}

int Partition::encode(std::span<const std::size_t> bins) const {
  if (kind_ != PartitionKind::per_axis)
    throw Error(ErrorCode::invalid_argument, "encode is defined for per-axis partitions only");
  if (bins.size() != dim_) throw Error(ErrorCode::dimension_mismatch, "bin index count mismatch");
  std::size_t index = 0;
  for (std::size_t d = 0; d < dim_; ++d) {
    const std::size_t b = edges_[d].size() - 1;
    if (bins[d] >= b) throw Error(ErrorCode::invalid_argument, "bin index out of range");
    index = index * b + bins[d];
  }
  return static_cast<int>(index) + 1;
}

std::vector<std::size_t> Partition::decode(int label) const {
  if (kind_ != PartitionKind::per_axis)
    throw Error(ErrorCode::invalid_argument, "decode is defined for per-axis partitions only");
  if (label < 1 || static_cast<std::size_t>(label) > states_)
    throw Error(ErrorCode::invalid_argument, "label out of range");
  std::size_t index = static_cast<std::size_t>(label - 1);
  std::vector<std::size_t> bins(dim_);
  for (std::size_t d = dim_; d-- > 0;) {
    const std::size_t b = edges_[d].size() - 1;
    bins[d] = index % b;
    index /= b;
  }
  return bins;
}

DistanceMatrix::DistanceMatrix(Matrix d) : d_(std::move(d)) {
  if (d_.rows() != d_.cols()) throw Error(ErrorCode::dimension_mismatch, "distance matrix must be square");
  for (Eigen::Index i = 0; i < d_.rows(); ++i) {
    if (d_(i, i) != 0.0) throw Error(ErrorCode::invalid_argument, "distance matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < d_.cols(); ++j) {
      if (!std::isfinite(d_(i, j)) || d_(i, j) < 0.0)
        throw Error(ErrorCode::invalid_argument, "distance matrix entries must be finite and nonnegative");
      if (d_(i, j) != d_(j, i)) throw Error(ErrorCode::invalid_argument, "distance matrix must be symmetric");
    }
  }
}

Partition partition_per_axis(const PointSet& points, std::span<const std::size_t> bins_per_axis,
                             EdgeRule rule) {
  if (bins_per_axis.empty()) throw Error(ErrorCode::invalid_argument, "need at least one axis");
  if (points.empty())
    throw Error(ErrorCode::insufficient_data, "per-axis partition from data needs at least one point");
  if (points.dim() != bins_per_axis.size())
    throw Error(ErrorCode::dimension_mismatch, "bins_per_axis length differs from data dimension");
  for (std::size_t n = 0; n < points.size(); ++n) require_finite(points[n]);

  std::vector<std::vector<double>> edges(points.dim());
  std::vector<double> values(points.size());
  for (std::size_t d = 0; d < points.dim(); ++d) {
    const std::size_t bins = bins_per_axis[d];
    if (bins == 0) throw Error(ErrorCode::invalid_argument, "bin counts must be positive");
    for (std::size_t n = 0; n < points.size(); ++n) values[n] = points[n][d];
    std::sort(values.begin(), values.end());
    auto& e = edges[d];
    e.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
      const double p = static_cast<double>(b) / static_cast<double>(bins);
      e[b] = rule == EdgeRule::quantile
                 ? quantile_sorted(values, p)
                 : values.front() + p * (values.back() - values.front());
    }
    e.back() = values.back();
  }
  return Partition::per_axis(std::move(edges));
}

Partition partition_uniform(std::span<const AxisRange> bounds,
                            std::span<const std::size_t> bins_per_axis) {
  if (bounds.size() != bins_per_axis.size())
    throw Error(ErrorCode::dimension_mismatch, "bounds and bins_per_axis differ in length");
  std::vector<std::vector<double>> edges(bounds.size());
  for (std::size_t d = 0; d < bounds.size(); ++d) {
    const std::size_t bins = bins_per_axis[d];
    if (bins == 0) throw Error(ErrorCode::invalid_argument, "bin counts must be positive");
    edges[d].resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b)
      edges[d][b] = bounds[d].lo + (bounds[d].hi - bounds[d].lo) * static_cast<double>(b) /
                                       static_cast<double>(bins);
    edges[d].back() = bounds[d].hi;
  }
  return Partition::per_axis(std::move(edges));
}

std::size_t distinct_count(const PointSet& points) { return distinct_indices(points).size(); }

KMeansFit kmeans(const PointSet& points, std::size_t k, std::uint64_t seed, std::size_t max_iter) {
  if (k == 0) throw Error(ErrorCode::invalid_argument, "K must be positive");
  if (max_iter == 0) throw Error(ErrorCode::invalid_argument, "max_iter must be positive");
  for (std::size_t n = 0; n < points.size(); ++n) require_finite(points[n]);
  const std::size_t distinct = distinct_count(points);
  if (k > distinct)
    throw Error(ErrorCode::insufficient_data,
                "K=" + std::to_string(k) + " exceeds the number of distinct points (" +
                    std::to_string(distinct) + ")");

  const std::size_t n_pts = points.size();
  const std::size_t dim = points.dim();
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  PointSet centers(dim);
  {
    std::uniform_int_distribution<std::size_t> pick(0, n_pts - 1);
    centers.push_back(points[pick(rng)]);
    std::vector<double> d2(n_pts);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    while (centers.size() < k) {
      const auto by_dim = dimension_major(centers);
      double total = 0.0;
      for (std::size_t n = 0; n < n_pts; ++n) {
        simd::nearest(by_dim, centers.size(), points[n], &d2[n]);
        total += d2[n];
      }
      double target = unit(rng) * total;
      std::size_t chosen = n_pts;
      for (std::size_t n = 0; n < n_pts; ++n) {
        if (d2[n] <= 0.0) continue;
        chosen = n;
        target -= d2[n];
        if (target < 0.0) break;
      }
      centers.push_back(points[chosen]);
    }
  }

  KMeansFit fit;
  std::vector<std::size_t> assignment(n_pts, k);
  std::vector<double> dist2(n_pts);
  std::vector<double> sums(k * dim);
  std::vector<std::size_t> counts(k);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    const auto by_dim = dimension_major(centers);
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t n = 0; n < n_pts; ++n) {
      const std::size_t c = simd::nearest(by_dim, k, points[n], &dist2[n]);
      if (c != assignment[n]) {
        assignment[n] = c;
        changed = true;
      }
      inertia += dist2[n];
    }
    fit.inertia_trace.push_back(inertia);
    fit.iterations = iter + 1;
    if (!changed) {
      fit.converged = true;
      break;
    }

    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t n = 0; n < n_pts; ++n) {
      const std::size_t c = assignment[n];
      ++counts[c];
      for (std::size_t d = 0; d < dim; ++d) sums[c * dim + d] += points[n][d];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      auto center = centers[c];
      for (std::size_t d = 0; d < dim; ++d)
        center[d] = sums[c * dim + d] / static_cast<double>(counts[c]);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      // Reseed with the point farthest from its center; its cost drops to zero.
      const auto far = static_cast<std::size_t>(
          std::max_element(dist2.begin(), dist2.end()) - dist2.begin());
      auto center = centers[c];
      std::copy(points[far].begin(), points[far].end(), center.begin());
      dist2[far] = 0.0;
      --counts[assignment[far]];
      assignment[far] = c;
      counts[c] = 1;
    }
  }
  fit.partition = Partition::voronoi(std::move(centers));
  return fit;
}

Partition sample_representatives(const PointSet& points, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error(ErrorCode::invalid_argument, "K must be positive");
  auto pool = distinct_indices(points);
  if (k > pool.size())
    throw Error(ErrorCode::insufficient_data,
                "K=" + std::to_string(k) + " exceeds the number of distinct points (" +
                    std::to_string(pool.size()) + ")");
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates over the distinct pool.
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  PointSet reps(points.dim());
  for (std::size_t idx : pool) reps.push_back(points[idx]);
  return Partition::voronoi(std::move(reps));
}

DistanceMatrix pairwise_distances(const Partition& partition) {
  const PointSet c = partition.centers();
  const auto k = static_cast<Eigen::Index>(c.size());
  Matrix d = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double v = std::sqrt(simd::active().squared_distance(
          c[static_cast<std::size_t>(i)].data(), c[static_cast<std::size_t>(j)].data(), c.dim()));
      d(i, j) = v;
      d(j, i) = v;
    }
  return DistanceMatrix(std::move(d));
}

}  // namespace mcsc::geometry
