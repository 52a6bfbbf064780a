#pragma once

// Data-parallel inner loops shared by the numerical modules.
//
// Every kernel has a scalar reference implementation and, where the target
// supports it, an AVX2 (x86-64) or NEON (aarch64) variant. The variant is
// chosen once at runtime from the CPU features; MCSC_SIMD=scalar|avx2|neon
// in the environment overrides the choice.
//
// Element-wise kernels (matvec, nearest, axpy) perform the same per-lane
// operation sequence as the scalar loop and are bit-identical to it.
// Reductions (dot, l1_distance, squared_distance, sum) reassociate and agree
// with the scalar reference to rounding.

#include <cstddef>
#include <span>
#include <string_view>

namespace mcsc::simd {

enum class Backend { scalar, avx2, neon };

std::string_view to_string(Backend backend);

struct KernelTable {
  Backend backend;
  // y = A x, A column-major with `rows` rows and `cols` columns.
  void (*matvec)(const double* a, std::size_t rows, std::size_t cols,
                 const double* x, double* y);
  // y = A^T x, A column-major.
  void (*matvec_transposed)(const double* a, std::size_t rows,
                            std::size_t cols, const double* x, double* y);
  // Index of the nearest center by squared Euclidean distance, ties to the
  // lowest index. Centers are stored dimension-major: centers[d * k + c].
  std::size_t (*nearest)(const double* centers, std::size_t k, std::size_t dim,
                         const double* point, double* best_sq);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  double (*l1_distance)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
};

bool supported(Backend backend) noexcept;

// Kernel table for a specific backend; throws mcsc::Error if unsupported.
const KernelTable& table(Backend backend);

// Active table (auto-detected on first use).
const KernelTable& active();
Backend active_backend();
void set_backend(Backend backend);

// Span conveniences over the active table.
void matvec(std::span<const double> a, std::size_t rows,
            std::span<const double> x, std::span<double> y);
void matvec_transposed(std::span<const double> a, std::size_t rows,
                       std::span<const double> x, std::span<double> y);
std::size_t nearest(std::span<const double> centers, std::size_t k,
                    std::span<const double> point, double* best_sq = nullptr);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
double l1_distance(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);

namespace detail {
const KernelTable& scalar_table();
#if defined(MCSC_HAVE_AVX2)
const KernelTable& avx2_table();
#endif
#if defined(MCSC_HAVE_NEON)
const KernelTable& neon_table();
#endif
}  // namespace detail

}  // namespace mcsc::simd
