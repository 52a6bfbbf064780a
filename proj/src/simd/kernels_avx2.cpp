#include <immintrin.h>

#include <cmath>
#include <limits>

#include "mcsc/simd/kernels.hpp"

namespace mcsc::simd::detail {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

void matvec(const double* a, std::size_t rows, std::size_t cols,
            const double* x, double* y) {
  std::size_t i = 0;
  // 16 rows per block held in registers across all columns.
  for (; i + 16 <= rows; i += 16) {
    __m256d y0 = _mm256_setzero_pd();
    __m256d y1 = _mm256_setzero_pd();
    __m256d y2 = _mm256_setzero_pd();
    __m256d y3 = _mm256_setzero_pd();
    for (std::size_t j = 0; j < cols; ++j) {
      const double* col = a + j * rows + i;
      const __m256d xj = _mm256_set1_pd(x[j]);
      y0 = _mm256_add_pd(y0, _mm256_mul_pd(_mm256_loadu_pd(col), xj));
      y1 = _mm256_add_pd(y1, _mm256_mul_pd(_mm256_loadu_pd(col + 4), xj));
      y2 = _mm256_add_pd(y2, _mm256_mul_pd(_mm256_loadu_pd(col + 8), xj));
      y3 = _mm256_add_pd(y3, _mm256_mul_pd(_mm256_loadu_pd(col + 12), xj));
    }
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
    _mm256_storeu_pd(y + i + 8, y2);
    _mm256_storeu_pd(y + i + 12, y3);
  }
  for (; i + 4 <= rows; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (std::size_t j = 0; j < cols; ++j) {
      const __m256d xj = _mm256_set1_pd(x[j]);
      acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + j * rows + i), xj));
    }
    _mm256_storeu_pd(y + i, acc);
  }
  for (; i < rows; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols; ++j) acc = acc + a[j * rows + i] * x[j];
    y[i] = acc;
  }
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd();
  __m256d s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_add_pd(s0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    s1 = _mm256_add_pd(s1, _mm256_mul_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4)));
  }
  for (; i + 4 <= n; i += 4)
    s0 = _mm256_add_pd(s0, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  double s = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void matvec_transposed(const double* a, std::size_t rows, std::size_t cols,
                       const double* x, double* y) {
  for (std::size_t j = 0; j < cols; ++j) y[j] = dot(a + j * rows, x, rows);
}

std::size_t nearest(const double* centers, std::size_t k, std::size_t dim,
                    const double* point, double* best_sq) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  alignas(32) double lane[4];
  std::size_t c = 0;
  for (; c + 4 <= k; c += 4) {
    __m256d s = _mm256_setzero_pd();
    for (std::size_t d = 0; d < dim; ++d) {
      const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(point[d]),
                                         _mm256_loadu_pd(centers + d * k + c));
      s = _mm256_add_pd(s, _mm256_mul_pd(diff, diff));
    }
    _mm256_store_pd(lane, s);
    for (std::size_t l = 0; l < 4; ++l) {
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
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d s = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    s = _mm256_add_pd(s, _mm256_mul_pd(d, d));
  }
  double r = hsum(s);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    r += d * d;
  }
  return r;
}

double l1_distance(const double* a, const double* b, std::size_t n) {
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d s = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    s = _mm256_add_pd(s, _mm256_andnot_pd(sign, d));
  }
  double r = hsum(s);
  for (; i < n; ++i) r += std::abs(a[i] - b[i]);
  return r;
}

double sum(const double* a, std::size_t n) {
  __m256d s = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) s = _mm256_add_pd(s, _mm256_loadu_pd(a + i));
  double r = hsum(s);
  for (; i < n; ++i) r += a[i];
  return r;
}

}  // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{Backend::avx2, matvec, matvec_transposed,
                                 nearest,       axpy,   dot,
                                 squared_distance, l1_distance, sum};
  return table;
}

}  // namespace mcsc::simd::detail
