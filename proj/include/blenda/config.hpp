#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "blenda/dataset.hpp"
#include "blenda/trainer.hpp"

namespace blenda {

struct AblationSettings {
  int seeds = 5;
  std::vector<double> static_deltas{0.7, 0.9, 1.0};

  void validate() const;
};

/// Everything one CLI invocation needs. Loaded from a single JSON document in
/// which every key is optional and unknown keys are rejected; the top-level
/// `seed` drives both benchmark generation and training.
struct RunConfig {
  std::uint64_t seed = 7;
  std::string dataset_root;
  std::string output_dir = "runs";
  std::string checkpoint;
  int schedule_samples = 101;
  double blend_delta = 0.7;
  /// Fine-tuning stops before this iteration when set (resume later from the
  /// written checkpoint).
  std::optional<std::int64_t> stop_at;
  BenchmarkConfig benchmark;
  AdaptationConfig adaptation;
  AblationSettings ablation;

  /// Pushes the shared seed and grid geometry into the nested configs.
  void synchronize();
  void validate() const;
};

/// Throws InvalidArgument naming the offending key path.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

}  // namespace blenda
