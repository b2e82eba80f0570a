#include <omp.h>

#include <algorithm>
#include <cstdint>

#include "blenda/kernels.hpp"

namespace blenda::kernels::parallel {

namespace {
// Below this many scalar operations a parallel region costs more than it saves.
constexpr std::int64_t kMinParallelWork = 1 << 15;
}  // namespace

int max_threads() { return omp_get_max_threads(); }

void lerp(std::span<const double> base, std::span<const double> other, double weight,
          std::span<double> out) {
  const auto count = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static) if (count >= kMinParallelWork)
  for (std::int64_t i = 0; i < count; ++i) {
    out[i] = lerp_pixel(base[i], other[i], weight);
  }
}

void fog(std::span<const double> src, const FogKernelArgs& args, std::span<double> out) {
  const auto count = static_cast<std::int64_t>(out.size());
#pragma omp parallel for schedule(static) if (count >= kMinParallelWork / 8)
  for (std::int64_t i = 0; i < count; ++i) {
    out[i] = fog_pixel(src[i], args, static_cast<std::uint64_t>(i));
  }
}

// Each output row is owned by one thread and accumulated in the same order as
// the serial kernel, so results match it bit for bit.
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
  const auto work = static_cast<std::int64_t>(m * k * n);
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    double* row = c.data() + i * n;
    std::fill(row, row + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] += aip * brow[j];
      }
    }
  }
}

void matmul_at_b_acc(std::span<const double> a, std::span<const double> g, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(k);
  const auto work = static_cast<std::int64_t>(m * k * n);
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
  for (std::int64_t p = 0; p < rows; ++p) {
    double* row = c.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = a[i * k + p];
      const double* grow = g.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) {
        row[j] += aip * grow[j];
      }
    }
  }
}

void matmul_a_bt_acc(std::span<const double> g, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n) {
  const auto rows = static_cast<std::int64_t>(m);
  const auto work = static_cast<std::int64_t>(m * k * n);
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
  for (std::int64_t i = 0; i < rows; ++i) {
    const double* grow = g.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b.data() + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        acc += grow[j] * brow[j];
      }
      c[i * k + p] += acc;
    }
  }
}

}  // namespace blenda::kernels::parallel
