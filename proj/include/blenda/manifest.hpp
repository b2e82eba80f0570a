#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "blenda/dataset.hpp"

namespace blenda {

enum class SampleRole { source, translated, blended, target, source_target_mix };

std::string_view to_string(SampleRole role);
SampleRole parse_role(std::string_view text);

/// One manifest line. Paths are relative to the manifest's directory.
struct SampleRecord {
  std::string source_path;
  std::string translated_path;
  std::optional<std::string> blended_path;
  Annotations annotations;
  double domain_label = 0.0;
  double delta_at_creation = 0.0;
  SampleRole role = SampleRole::source;

  /// Role-dependent label rules: source 0, target 1, blended and
  /// source_target_mix carry domain_label == delta_at_creation.
  void validate() const;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

inline constexpr int kManifestSchemaVersion = 1;

/// JSON lines: a `{"schema_version": 1}` header, then one record per line.
void write_manifest(const std::filesystem::path& path, std::span<const SampleRecord> records);

/// Throws IoError on schema mismatch or malformed lines, and (when
/// `check_files` is set) names the first referenced file that is missing.
std::vector<SampleRecord> read_manifest(const std::filesystem::path& path, bool check_files = true);

}  // namespace blenda
