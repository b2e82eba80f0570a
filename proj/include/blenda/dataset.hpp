#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "blenda/image.hpp"

namespace blenda {

/// Ground truth for one occupied grid cell.
struct Annotation {
  int row = 0;
  int col = 0;
  int class_id = 0;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

using Annotations = std::vector<Annotation>;

enum class ObjectShape { square, disc, cross, diamond };

struct SceneObject {
  int row = 0;
  int col = 0;
  int class_id = 0;
  ObjectShape shape = ObjectShape::square;
  std::array<double, 3> color{};
  double half_extent = 3.0;  // pixels
  double offset_x = 0.0;     // center offset within the cell, pixels
  double offset_y = 0.0;
};

/// A square scene on a grid of cells, at most one object per cell.
struct SceneSpec {
  int image_size = 32;
  int grid_size = 4;
  int num_classes = 3;
  std::vector<SceneObject> objects;
  std::uint64_t background_seed = 0;

  void validate() const;
  int cell_size() const { return image_size / grid_size; }
  Annotations annotations() const;
};

ImageBuffer render_scene(const SceneSpec& spec);

struct BenchmarkConfig {
  int image_size = 32;
  int grid_size = 4;
  int num_classes = 3;
  int source_count = 200;
  int target_count = 200;
  int min_objects = 3;
  int max_objects = 7;
  /// Corruption applied to every source scene to build its translated pair.
  /// Heavier than the target and with fog banks, so some objects vanish.
  FogParams translator_fog{0.95, 0.8, 0.1, 58912, 2, 7.0};
  /// Corruption that defines the target domain.
  FogParams target_fog{0.6, 0.8, 0.04, 981};
  /// Per-scene target fog strength is drawn from target_fog.fog_strength +/- jitter.
  double target_fog_jitter = 0.2;
  std::uint64_t seed = 7;

  void validate() const;
};

/// Draws a random scene layout; fully determined by `seed`.
SceneSpec random_scene(const BenchmarkConfig& config, std::uint64_t seed);

int class_count_with_background(const BenchmarkConfig& config);

struct SourceSample {
  std::string name;
  ImageBuffer image;
  ImageBuffer translated;
  Annotations annotations;
};

/// Target-domain images. Annotations exist only for evaluation; every read
/// through evaluation_annotations() is counted so tests can assert that no
/// training path touches them.
class TargetSet {
 public:
  TargetSet() = default;
  TargetSet(std::vector<std::string> names, std::vector<ImageBuffer> images,
            std::vector<Annotations> annotations);
  TargetSet(const TargetSet& other);
  TargetSet& operator=(const TargetSet& other);
  TargetSet(TargetSet&&) noexcept;
  TargetSet& operator=(TargetSet&&) noexcept;

  std::size_t size() const noexcept { return images_.size(); }
  bool empty() const noexcept { return images_.empty(); }
  const ImageBuffer& image(std::size_t i) const { return images_.at(i); }
  const std::string& name(std::size_t i) const { return names_.at(i); }

  const Annotations& evaluation_annotations(std::size_t i) const;
  std::size_t annotation_reads() const noexcept { return reads_.load(); }

 private:
  std::vector<std::string> names_;
  std::vector<ImageBuffer> images_;
  std::vector<Annotations> annotations_;
  mutable std::atomic<std::size_t> reads_{0};
};

struct Benchmark {
  BenchmarkConfig config;
  std::vector<SourceSample> sources;
  TargetSet targets;
};

/// Deterministic in `config` (including `config.seed`); scenes are generated
/// in parallel with per-scene derived seeds.
Benchmark generate_benchmark(const BenchmarkConfig& config);

/// Layout under `root`: source/<name>.png, source/<name>.translated.png,
/// source/<name>.anno, target/<name>.png, target/<name>.anno and
/// benchmark.manifest.
void save_benchmark(const Benchmark& benchmark, const std::filesystem::path& root);
Benchmark load_benchmark(const std::filesystem::path& root);

void write_annotations(const Annotations& annotations, const std::filesystem::path& path);
Annotations read_annotations(const std::filesystem::path& path);

/// Checks every annotation lies inside the grid with a valid class.
void validate_annotations(const Annotations& annotations, int grid_size, int num_classes);

struct BlendedSample {
  ImageBuffer image;
  Annotations annotations;
  double domain_label = 0.0;
  double delta = 0.0;
  std::size_t source_index = 0;
};

struct SourceTargetMixSample {
  ImageBuffer image;
  double domain_label = 0.0;
  double delta = 0.0;
  std::size_t source_index = 0;
  std::size_t target_index = 0;
};

/// Builds one iteration's inputs: a uniformly drawn source blended with its
/// translated pair, and the same source blended with a uniformly drawn target.
/// Both carry domain_label = delta.
std::pair<BlendedSample, SourceTargetMixSample> pair_for_iteration(
    const std::vector<SourceSample>& sources, const TargetSet& targets, double delta,
    std::mt19937_64& rng);

/// Uniform index in [0, n) from the top 53 bits of one engine draw.
std::size_t uniform_index(std::mt19937_64& rng, std::size_t n);
double uniform_real(std::mt19937_64& rng, double lo, double hi);

}  // namespace blenda
