#include <algorithm>

#include "blenda/kernels.hpp"
#include "blenda/rng.hpp"

namespace blenda::kernels {

double fog_pixel(double src, const FogKernelArgs& args, std::uint64_t index) {
  const double veil = args.veil_luminance;
  const double f = args.pixel_strength.empty() ? args.fog_strength : args.pixel_strength[index / 3];
  double v;
  if (f == 1.0) {
    v = veil;
  } else {
    // monotone in f: src + f * (veil - src), kept between src and veil
    v = src + f * (veil - src);
    v = std::clamp(v, std::min(src, veil), std::max(src, veil));
  }
  if (args.noise_sigma > 0.0) {
    v += args.noise_sigma * counter_normal(args.seed, index);
  }
  return std::clamp(v, 0.0, 1.0);
}

namespace serial {

void lerp(std::span<const double> base, std::span<const double> other, double weight,
          std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = lerp_pixel(base[i], other[i], weight);
  }
}

void fog(std::span<const double> src, const FogKernelArgs& args, std::span<double> out) {
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = fog_pixel(src[i], args, i);
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
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
  for (std::size_t p = 0; p < k; ++p) {
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
  for (std::size_t i = 0; i < m; ++i) {
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

}  // namespace serial
}  // namespace blenda::kernels
