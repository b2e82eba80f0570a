#include "blenda/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "blenda/error.hpp"
#include "blenda/kernels.hpp"
#include "blenda/rng.hpp"

namespace blenda {

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width)
    : height_(height), width_(width), data_(height * width * kChannels, 0.0) {}

ImageBuffer::ImageBuffer(std::size_t height, std::size_t width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != height_ * width_ * kChannels) {
    throw ShapeError("image data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(height_) + "x" + std::to_string(width_) + "x3");
  }
  validate();
}

void ImageBuffer::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = data_[i];
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InvalidArgument("image value at index " + std::to_string(i) +
                            " is outside [0, 1]: " + std::to_string(v));
    }
  }
}

void FogParams::validate() const {
  if (!std::isfinite(fog_strength) || fog_strength < 0.0 || fog_strength > 1.0) {
    throw InvalidArgument("fog_strength must lie in [0, 1]");
  }
  if (!std::isfinite(veil_luminance) || veil_luminance < 0.0 || veil_luminance > 1.0) {
    throw InvalidArgument("veil_luminance must lie in [0, 1]");
  }
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
    throw InvalidArgument("noise_sigma must be finite and non-negative");
  }
  if (patch_count < 0) {
    throw InvalidArgument("patch_count must be non-negative");
  }
  if (!std::isfinite(patch_radius) || patch_radius <= 0.0) {
    throw InvalidArgument("patch_radius must be positive");
  }
}

namespace {

constexpr std::uint64_t kPatchStream = 0x70a7c4;

// Empty when there are no fog banks.
std::vector<double> fog_strength_map(const ImageBuffer& image, const FogParams& params) {
  if (params.patch_count == 0) {
    return {};
  }
  const auto h = static_cast<int>(image.height());
  const auto w = static_cast<int>(image.width());
  const std::uint64_t pseed = derive_seed(params.seed, kPatchStream);
  std::vector<double> cy(params.patch_count);
  std::vector<double> cx(params.patch_count);
  for (int k = 0; k < params.patch_count; ++k) {
    cy[k] = counter_uniform(pseed, 2 * static_cast<std::uint64_t>(k)) * h;
    cx[k] = counter_uniform(pseed, 2 * static_cast<std::uint64_t>(k) + 1) * w;
  }
  const double r2 = params.patch_radius * params.patch_radius;
  std::vector<double> map(static_cast<std::size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // flat core over the inner half of the radius, smooth falloff outside it
      double bank = 0.0;
      for (int k = 0; k < params.patch_count; ++k) {
        const double dy = y + 0.5 - cy[k];
        const double dx = x + 0.5 - cx[k];
        const double t = (dy * dy + dx * dx) / r2;
        bank = std::max(bank, std::clamp(2.0 - 2.0 * std::sqrt(t), 0.0, 1.0));
      }
      const double f = params.fog_strength + (1.0 - params.fog_strength) * bank;
      map[static_cast<std::size_t>(y) * w + x] = bank >= 1.0 ? 1.0 : std::min(f, 1.0);
    }
  }
  return map;
}

ImageBuffer mix(const ImageBuffer& base, const ImageBuffer& other, double weight, Execution exec,
                const char* what) {
  if (!base.same_shape(other)) {
    throw ShapeError(std::string(what) + ": dimension mismatch " + std::to_string(base.height()) +
                     "x" + std::to_string(base.width()) + " vs " + std::to_string(other.height()) +
                     "x" + std::to_string(other.width()));
  }
  if (!(weight >= 0.0 && weight <= 1.0)) {
    throw InvalidArgument(std::string(what) + ": delta must lie in [0, 1]");
  }
  ImageBuffer out(base.height(), base.width());
  if (exec == Execution::serial) {
    kernels::serial::lerp(base.data(), other.data(), weight, out.mutable_data());
  } else {
    kernels::parallel::lerp(base.data(), other.data(), weight, out.mutable_data());
  }
  return out;
}

}  // namespace

ImageBuffer blend_images(const ImageBuffer& source, const ImageBuffer& translated, double delta,
                         Execution exec) {
  return mix(source, translated, delta, exec, "blend_images");
}

ImageBuffer blend_source_target(const ImageBuffer& source, const ImageBuffer& target,
                                double delta, Execution exec) {
  return mix(source, target, delta, exec, "blend_source_target");
}

ImageBuffer fog_translate(const ImageBuffer& source, const FogParams& params, Execution exec) {
  params.validate();
  kernels::FogKernelArgs args{params.fog_strength, params.veil_luminance, params.noise_sigma,
                              params.seed};
  const std::vector<double> strength = fog_strength_map(source, params);
  args.pixel_strength = strength;
  ImageBuffer out(source.height(), source.width());
  if (exec == Execution::serial) {
    kernels::serial::fog(source.data(), args, out.mutable_data());
  } else {
    kernels::parallel::fog(source.data(), args, out.mutable_data());
  }
  return out;
}

}  // namespace blenda
