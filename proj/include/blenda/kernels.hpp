#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel`; both
// produce bit-identical output for any thread count.

#include <cstddef>
#include <cstdint>
#include <span>

namespace blenda::kernels {

struct FogKernelArgs {
  double fog_strength = 0.0;
  double veil_luminance = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  /// Optional per-pixel strength (one entry per RGB triple); overrides
  /// fog_strength when non-empty.
  std::span<const double> pixel_strength{};
};

namespace serial {

/// out[i] = weight * other[i] + (1 - weight) * base[i], kept within
/// [min(base, other), max(base, other)].
void lerp(std::span<const double> base, std::span<const double> other, double weight,
          std::span<double> out);

/// Veil blend plus counter-addressed gaussian noise, clamped to [0, 1].
void fog(std::span<const double> src, const FogKernelArgs& args, std::span<double> out);

/// C (m x n) = A (m x k) * B (k x n), row-major.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);

/// C (k x n) += A^T * G where A is (m x k) and G is (m x n).
void matmul_at_b_acc(std::span<const double> a, std::span<const double> g, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);

/// C (m x k) += G * B^T where G is (m x n) and B is (k x n).
void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);

}  // namespace serial

namespace parallel {

void lerp(std::span<const double> base, std::span<const double> other, double weight,
          std::span<double> out);
void fog(std::span<const double> src, const FogKernelArgs& args, std::span<double> out);
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);
void matmul_at_b_acc(std::span<const double> a, std::span<const double> g, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);
void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);

/// Threads OpenMP would use for a parallel region here.
int max_threads();

}  // namespace parallel

/// Per-element fog value; shared by both kernel variants.
double fog_pixel(double src, const FogKernelArgs& args, std::uint64_t index);

/// Per-element convex blend; shared by both kernel variants.
inline double lerp_pixel(double base, double other, double weight) {
  if (base == other) {
    return base;
  }
  const double v = weight * other + (1.0 - weight) * base;
  const double lo = base < other ? base : other;
  const double hi = base < other ? other : base;
  return v < lo ? lo : (v > hi ? hi : v);
}

}  // namespace blenda::kernels
