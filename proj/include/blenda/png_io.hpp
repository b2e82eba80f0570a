#pragma once

#include <filesystem>

#include "blenda/image.hpp"

namespace blenda {

/// Reads an 8-bit RGB PNG, mapping byte v to v / 255. Throws IoError for
/// missing, corrupt, 16-bit, palette, gray or alpha images.
ImageBuffer read_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG, mapping x to round(x * 255) half away from zero.
void write_image(const ImageBuffer& image, const std::filesystem::path& path);

std::uint8_t to_byte(double value);
inline double from_byte(std::uint8_t value) { return static_cast<double>(value) / 255.0; }

}  // namespace blenda
