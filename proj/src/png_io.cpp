#include "blenda/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "blenda/error.hpp"

namespace blenda {

namespace {

struct ImageGuard {
  png_image image;
  ImageGuard() {
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
  }
  ~ImageGuard() { png_image_free(&image); }
  ImageGuard(const ImageGuard&) = delete;
  ImageGuard& operator=(const ImageGuard&) = delete;
};

}  // namespace

std::uint8_t to_byte(double value) {
  return static_cast<std::uint8_t>(std::lround(value * 255.0));
}

ImageBuffer read_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("image not found: " + path.string());
  }
  ImageGuard guard;
  png_image& image = guard.image;
  if (png_image_begin_read_from_file(&image, path.c_str()) == 0) {
    throw IoError("cannot read PNG " + path.string() + ": " + image.message);
  }
  if (image.format != PNG_FORMAT_RGB) {
    throw IoError("unsupported PNG format in " + path.string() + ": expected 8-bit RGB");
  }
  std::vector<png_byte> bytes(PNG_IMAGE_SIZE(image));
  if (png_image_finish_read(&image, nullptr, bytes.data(), 0, nullptr) == 0) {
    throw IoError("corrupt PNG " + path.string() + ": " + image.message);
  }
  std::vector<double> data(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    data[i] = from_byte(bytes[i]);
  }
  return ImageBuffer(image.height, image.width, std::move(data));
}

void write_image(const ImageBuffer& image, const std::filesystem::path& path) {
  if (image.height() == 0 || image.width() == 0) {
    throw IoError("cannot write an empty image to " + path.string());
  }
  std::vector<png_byte> bytes(image.size());
  const auto values = image.data();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    bytes[i] = to_byte(values[i]);
  }
  ImageGuard guard;
  guard.image.width = static_cast<png_uint_32>(image.width());
  guard.image.height = static_cast<png_uint_32>(image.height());
  guard.image.format = PNG_FORMAT_RGB;
  if (png_image_write_to_file(&guard.image, path.c_str(), 0, bytes.data(), 0, nullptr) == 0) {
    throw IoError("cannot write PNG " + path.string() + ": " + guard.image.message);
  }
}

}  // namespace blenda
