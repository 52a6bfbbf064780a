#include <cmath>
#include <limits>

#include "mcsc/simd/kernels.hpp"

namespace mcsc::simd::detail {
namespace {

void matvec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  for (std::size_t i = 0; i < rows; ++i) y[i] = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    const double xj = x[j];
    const double* col = a + j * rows;
    for (std::size_t i = 0; i < rows; ++i) y[i] = y[i] + col[i] * xj;
  }
}

void matvec_transposed(const double* a, std::size_t rows, std::size_t cols,
                       const double* x, double* y) {
  for (std::size_t j = 0; j < cols; ++j) {
    const double* col = a + j * rows;
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += col[i] * x[i];
    y[j] = s;
  }
}

std::size_t nearest(const double* centers, std::size_t k, std::size_t dim,
                    const double* point, double* best_sq) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    double s = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double diff = point[d] - centers[d * k + c];
      s = s + diff * diff;
    }
    if (s < best_d) {
      best_d = s;
      best = c;
    }
  }
  if (best_sq) *best_sq = best_d;
  return best;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double l1_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::abs(a[i] - b[i]);
  return s;
}

double sum(const double* a, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i];
  return s;
}

}  // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{Backend::scalar, matvec, matvec_transposed,
                                 nearest,         axpy,   dot,
                                 squared_distance, l1_distance, sum};
  return table;
}

}  // namespace mcsc::simd::detail
