#include <arm_neon.h>

#include <cmath>
#include <limits>

#include "mcsc/simd/kernels.hpp"

namespace mcsc::simd::detail {
namespace {

void matvec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  std::size_t i = 0;
  for (; i + 8 <= rows; i += 8) {
    float64x2_t y0 = vdupq_n_f64(0.0), y1 = vdupq_n_f64(0.0);
    float64x2_t y2 = vdupq_n_f64(0.0), y3 = vdupq_n_f64(0.0);
    for (std::size_t j = 0; j < cols; ++j) {
      const double* col = a + j * rows + i;
      const float64x2_t xj = vdupq_n_f64(x[j]);
      y0 = vaddq_f64(y0, vmulq_f64(vld1q_f64(col), xj));
      y1 = vaddq_f64(y1, vmulq_f64(vld1q_f64(col + 2), xj));
      y2 = vaddq_f64(y2, vmulq_f64(vld1q_f64(col + 4), xj));
      y3 = vaddq_f64(y3, vmulq_f64(vld1q_f64(col + 6), xj));
    }
    vst1q_f64(y + i, y0);
    vst1q_f64(y + i + 2, y1);
    vst1q_f64(y + i + 4, y2);
    vst1q_f64(y + i + 6, y3);
  }
  for (; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc = acc + a[j * rows + i] * x[j];
    y[i] = acc;
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  float64x2_t s = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) s = vaddq_f64(s, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double r = vaddvq_f64(s);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

void matvec_transposed(const double* a, std::size_t rows, std::size_t cols,
                       const double* x, double* y) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = dot(a + j * rows, x, rows);
}

std::size_t nearest(const double* centers, std::size_t k, std::size_t dim,
                    const double* point, double* best_sq) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  double lane[2];
  std::size_t c = 0;
  for (; c + 2 <= k; c += 2) {
    float64x2_t s = vdupq_n_f64(0.0);
    for (std::size_t d = 0; d < dim; ++d) {
      const float64x2_t diff = vsubq_f64(vdupq_n_f64(point[d]), vld1q_f64(centers + d * k + c));
      s = vaddq_f64(s, vmulq_f64(diff, diff));
    }
    vst1q_f64(lane, s);
    for (std::size_t l = 0; l < 2; ++l) {
      if (lane[l] < best_d) {
        best_d = lane[l];
        best = c + l;
      }
    }
  }
  for (; c < k; ++c) {
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
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2)
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  float64x2_t s = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
    s = vaddq_f64(s, vmulq_f64(d, d));
  }
  double r = vaddvq_f64(s);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    r += d * d;
  }
  return r;
}

double l1_distance(const double* a, const double* b, std::size_t n) {
  float64x2_t s = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) s = vaddq_f64(s, vabdq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  double r = vaddvq_f64(s);
  for (; i < n; ++i) r += std::abs(a[i] - b[i]);
  return r;
}

double sum(const double* a, std::size_t n) {
  float64x2_t s = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) s = vaddq_f64(s, vld1q_f64(a + i));
  double r = vaddvq_f64(s);
  for (; i < n; ++i) r += a[i];
  return r;
}

}  // namespace

const KernelTable& neon_table() {
  static const KernelTable table{Backend::neon, matvec, matvec_transposed,
                                 nearest,       axpy,   dot,
                                 squared_distance, l1_distance, sum};
  return table;
}

}  // namespace mcsc::simd::detail
