#include "blenda/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "blenda/error.hpp"

namespace blenda::ad {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw IoError("truncated checkpoint: " + path.string());
  }
  return value;
}

}  // namespace

void write_arrays(const std::filesystem::path& path, std::span<const Matrix> arrays) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open checkpoint for writing: " + path.string());
  }
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint8_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, arrays.size());
  for (const Matrix& m : arrays) {
    put<std::uint64_t>(out, m.rows);
    put<std::uint64_t>(out, m.cols);
    out.write(reinterpret_cast<const char*>(m.values.data()),
              static_cast<std::streamsize>(m.values.size() * sizeof(double)));
  }
  if (!out) {
    throw IoError("failed writing checkpoint " + path.string());
  }
}

std::vector<Matrix> read_arrays(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open checkpoint: " + path.string());
  }
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw IoError("not a checkpoint file (bad magic): " + path.string());
  }
  const auto version = get<std::uint8_t>(in, path);
  if (version != kCheckpointVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version) + " in " +
                  path.string());
  }
  const auto count = get<std::uint64_t>(in, path);
  const auto file_size = std::filesystem::file_size(path);
  std::vector<Matrix> arrays;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto rows = get<std::uint64_t>(in, path);
    const auto cols = get<std::uint64_t>(in, path);
    if (rows != 0 && cols > file_size / sizeof(double) / rows) {
      throw IoError("checkpoint array shape exceeds file size: " + path.string());
    }
    Matrix m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.values.data()),
                 static_cast<std::streamsize>(m.values.size() * sizeof(double)))) {
      throw IoError("truncated checkpoint: " + path.string());
    }
    arrays.push_back(std::move(m));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw IoError("trailing bytes in checkpoint: " + path.string());
  }
  return arrays;
}

}  // namespace blenda::ad
