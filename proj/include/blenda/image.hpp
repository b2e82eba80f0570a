#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace blenda {

/// H x W x 3 image with values in [0, 1], row-major (row, column, channel).
class ImageBuffer {
 public:
  static constexpr std::size_t kChannels = 3;

  ImageBuffer() = default;
  /// Zero-filled image.
  ImageBuffer(std::size_t height, std::size_t width);
  /// Takes ownership of `data`; throws ShapeError on a length mismatch and
  /// InvalidArgument if any value is non-finite or outside [0, 1].
  ImageBuffer(std::size_t height, std::size_t width, std::vector<double> data);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t channels() const noexcept { return kChannels; }
  std::size_t size() const noexcept { return data_.size(); }
  bool same_shape(const ImageBuffer& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  std::span<const double> data() const noexcept { return data_; }
  /// Mutable access for renderers; callers keep values in [0, 1].
  std::span<double> mutable_data() noexcept { return data_; }

  double at(std::size_t row, std::size_t col, std::size_t channel) const {
    return data_[(row * width_ + col) * kChannels + channel];
  }
  double& at(std::size_t row, std::size_t col, std::size_t channel) {
    return data_[(row * width_ + col) * kChannels + channel];
  }

  /// Throws InvalidArgument if any value is non-finite or outside [0, 1].
  void validate() const;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

/// Parameters of the deterministic fog corruption that stands in for an
/// image-to-image translator.
struct FogParams {
  double fog_strength = 0.0;
  double veil_luminance = 0.8;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  /// Dense fog banks: each raises the local strength toward 1 inside a disc
  /// of `patch_radius` pixels, hiding whatever lies under its core.
  int patch_count = 0;
  double patch_radius = 6.0;

  void validate() const;
};

enum class Execution { serial, parallel };

/// delta * translated + (1 - delta) * source, per pixel.
ImageBuffer blend_images(const ImageBuffer& source, const ImageBuffer& translated, double delta,
                         Execution exec = Execution::parallel);

/// delta * target + (1 - delta) * source, per pixel. Shapes must already agree.
ImageBuffer blend_source_target(const ImageBuffer& source, const ImageBuffer& target,
                                double delta, Execution exec = Execution::parallel);

/// clamp(source + f * (veil - source) + N(0, noise_sigma^2)) where f is
/// fog_strength raised by any fog banks. Noise and bank placement are
/// addressed by seed, so output depends only on the inputs. Geometry is
/// preserved.
ImageBuffer fog_translate(const ImageBuffer& source, const FogParams& params,
                          Execution exec = Execution::parallel);

}  // namespace blenda
