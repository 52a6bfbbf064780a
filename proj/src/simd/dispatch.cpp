#include <atomic>
#include <cstdlib>
#include <string>

#include "mcsc/error.hpp"
#include "mcsc/simd/kernels.hpp"

namespace mcsc::simd {
namespace {

bool cpu_has_avx2() noexcept {
#if defined(MCSC_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend detect() {
  if (const char* env = std::getenv("MCSC_SIMD")) {
    const std::string_view want{env};
    if (want == "scalar") return Backend::scalar;
    if (want == "avx2" && supported(Backend::avx2)) return Backend::avx2;
    if (want == "neon" && supported(Backend::neon)) return Backend::neon;
  }
  if (supported(Backend::avx2)) return Backend::avx2;
  if (supported(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

std::atomic<const KernelTable*>& current() {
  static std::atomic<const KernelTable*> ptr{&table(detect())};
  return ptr;
}

}  // namespace

std::string_view to_string(Backend backend) {
  switch (backend) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
    case Backend::neon: return "neon";
  }
  return "unknown";
}

bool supported(Backend backend) noexcept {
  switch (backend) {
    case Backend::scalar: return true;
    case Backend::avx2: return cpu_has_avx2();
    case Backend::neon:
#if defined(MCSC_HAVE_NEON)
      return true;
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& table(Backend backend) {
  if (!supported(backend))
    throw Error(ErrorCode::invalid_argument,
                "SIMD backend not supported on this CPU: " + std::string(to_string(backend)));
  switch (backend) {
#if defined(MCSC_HAVE_AVX2)
    case Backend::avx2: return detail::avx2_table();
#endif
#if defined(MCSC_HAVE_NEON)
    case Backend::neon: return detail::neon_table();
#endif
    default: return detail::scalar_table();
  }
}

const KernelTable& active() { return *current().load(std::memory_order_acquire); }

Backend active_backend() { return active().backend; }

void set_backend(Backend backend) {
  current().store(&table(backend), std::memory_order_release);
}

void matvec(std::span<const double> a, std::size_t rows,
            std::span<const double> x, std::span<double> y) {
  active().matvec(a.data(), rows, x.size(), x.data(), y.data());
}

void matvec_transposed(std::span<const double> a, std::size_t rows,
                       std::span<const double> x, std::span<double> y) {
  active().matvec_transposed(a.data(), rows, y.size(), x.data(), y.data());
}

std::size_t nearest(std::span<const double> centers, std::size_t k,
                    std::span<const double> point, double* best_sq) {
  return active().nearest(centers.data(), k, point.size(), point.data(), best_sq);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
  return active().l1_distance(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a) { return active().sum(a.data(), a.size()); }

}  // namespace mcsc::simd
