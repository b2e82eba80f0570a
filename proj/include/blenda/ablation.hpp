#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "blenda/config.hpp"

namespace blenda {

/// One row of the ablation matrix.
struct AblationVariant {
  std::string name;
  bool source_only = false;
  std::optional<double> static_delta;
  AdversarialMode mode = AdversarialMode::mixed;
};

/// Source-only baseline, then every static delta and the dynamic schedule,
/// each under hard and mixed adversarial losses.
std::vector<AblationVariant> ablation_variants(const AblationSettings& settings);

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationVariant> variants;
  /// Final-epoch target mAP, indexed [variant][seed].
  std::vector<std::vector<double>> map;

  double median(std::size_t variant) const;
  /// Index of the variant with this name; throws if absent.
  std::size_t find(const std::string& name) const;
};

/// Worker count from BLENDA_WORKERS, else hardware concurrency (at least 1).
int ablation_workers_from_env();

/// Runs `count` jobs on at most `workers` threads. Each worker runs its
/// OpenMP regions single-threaded. Rethrows the first failure by job index.
void run_jobs(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

/// Per seed: generate the benchmark, pretrain once with hard adversarial
/// alignment (shared by all adaptation rows) and once without target data
/// (source-only), then fine-tune every variant. Writes per-run metrics CSVs
/// under `out_dir/runs` when `out_dir` is given. Output is independent of
/// `workers`.
AblationReport run_ablation(const RunConfig& config, int workers,
                            const std::optional<std::filesystem::path>& out_dir = std::nullopt);

/// `config,mode,seed_<s>...,median`, one line per adaptation variant
/// (delta setting x adversarial loss).
void write_ablation_table(std::ostream& out, const AblationReport& report);
/// Same columns for the source-only baseline.
void write_baseline_table(std::ostream& out, const AblationReport& report);

/// Markdown summary with the hard vs mixed comparison per delta setting.
void write_ablation_summary(std::ostream& out, const AblationReport& report);

}  // namespace blenda
