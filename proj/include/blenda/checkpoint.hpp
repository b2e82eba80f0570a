#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "blenda/autodiff.hpp"

namespace blenda::ad {

/// Binary layout, little-endian:
///   8 bytes magic "BLENDACK", 1 byte version, u64 array count,
///   then per array: u64 rows, u64 cols, rows*cols IEEE-754 doubles.
inline constexpr char kCheckpointMagic[8] = {'B', 'L', 'E', 'N', 'D', 'A', 'C', 'K'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

void write_arrays(const std::filesystem::path& path, std::span<const Matrix> arrays);

/// Throws IoError on a bad magic, unknown version or truncated file.
std::vector<Matrix> read_arrays(const std::filesystem::path& path);

}  // namespace blenda::ad
