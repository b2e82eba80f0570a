#include "blenda/dataset.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "blenda/error.hpp"
#include "blenda/manifest.hpp"
#include "blenda/png_io.hpp"
#include "blenda/rng.hpp"

namespace blenda {

namespace fs = std::filesystem;

std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) {
    throw InvalidArgument("uniform_index over an empty range");
  }
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return std::min(static_cast<std::size_t>(u * static_cast<double>(n)), n - 1);
}

double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// ---------------------------------------------------------------- scenes

void SceneSpec::validate() const {
  if (image_size <= 0 || grid_size <= 0 || image_size % grid_size != 0) {
    throw InvalidArgument("image_size must be a positive multiple of grid_size");
  }
  if (num_classes < 2) {
    throw InvalidArgument("num_classes must be >= 2");
  }
  std::vector<bool> taken(static_cast<std::size_t>(grid_size * grid_size), false);
  for (const auto& o : objects) {
    if (o.row < 0 || o.row >= grid_size || o.col < 0 || o.col >= grid_size) {
      throw InvalidArgument("scene object outside the grid");
    }
    if (o.class_id < 0 || o.class_id >= num_classes) {
      throw InvalidArgument("scene object class out of range");
    }
    const auto slot = static_cast<std::size_t>(o.row * grid_size + o.col);
    if (taken[slot]) {
      throw InvalidArgument("more than one object in a grid cell");
    }
    taken[slot] = true;
  }
}

Annotations SceneSpec::annotations() const {
  Annotations out;
  out.reserve(objects.size());
  for (const auto& o : objects) {
    out.push_back({o.row, o.col, o.class_id});
  }
  std::sort(out.begin(), out.end(), [](const Annotation& a, const Annotation& b) {
    return std::tie(a.row, a.col) < std::tie(b.row, b.col);
  });
  return out;
}

namespace {

bool covers(ObjectShape shape, double dx, double dy, double r) {
  switch (shape) {
    case ObjectShape::square:
      return std::abs(dx) <= r && std::abs(dy) <= r;
    case ObjectShape::disc:
      return dx * dx + dy * dy <= r * r;
    case ObjectShape::cross: {
      const double arm = std::max(0.75, r * 0.35);
      return (std::abs(dx) <= arm && std::abs(dy) <= r) || (std::abs(dy) <= arm && std::abs(dx) <= r);
    }
    case ObjectShape::diamond:
      return std::abs(dx) + std::abs(dy) <= r * 1.2;
  }
  return false;
}

// Saturated color at `hue` in [0, 6); never gray.
std::array<double, 3> hue_color(double hue) {
  const double x = 1.0 - std::abs(std::fmod(hue, 2.0) - 1.0);
  std::array<double, 3> rgb{};
  switch (static_cast<int>(hue)) {
    case 0: rgb = {1, x, 0}; break;
    case 1: rgb = {x, 1, 0}; break;
    case 2: rgb = {0, 1, x}; break;
    case 3: rgb = {0, x, 1}; break;
    case 4: rgb = {x, 0, 1}; break;
    default: rgb = {1, 0, x}; break;
  }
  for (auto& c : rgb) {
    c = 0.15 + 0.7 * c;
  }
  return rgb;
}

}  // namespace

ImageBuffer render_scene(const SceneSpec& spec) {
  spec.validate();
  const auto size = static_cast<std::size_t>(spec.image_size);
  ImageBuffer image(size, size);
  std::mt19937_64 rng(spec.background_seed);

  // Gray background with a gentle linear gradient and fine texture.
  const double base = uniform_real(rng, 0.3, 0.55);
  const double gx = uniform_real(rng, -0.08, 0.08);
  const double gy = uniform_real(rng, -0.08, 0.08);
  std::array<double, 3> tint{};
  for (auto& t : tint) {
    t = uniform_real(rng, -0.03, 0.03);
  }
  const std::uint64_t tseed = rng();
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double u = static_cast<double>(c) / static_cast<double>(size) - 0.5;
      const double v = static_cast<double>(r) / static_cast<double>(size) - 0.5;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const auto idx = (r * size + c) * 3 + ch;
        const double value = base + gx * u + gy * v + tint[ch] + 0.03 * counter_normal(tseed, idx);
        image.at(r, c, ch) = std::clamp(value, 0.0, 1.0);
      }
    }
  }

  const double cell = spec.cell_size();
  for (const auto& o : spec.objects) {
    const double cx = (o.col + 0.5) * cell - 0.5 + o.offset_x;
    const double cy = (o.row + 0.5) * cell - 0.5 + o.offset_y;
    const auto r0 = static_cast<std::size_t>(o.row * spec.cell_size());
    const auto c0 = static_cast<std::size_t>(o.col * spec.cell_size());
    for (std::size_t r = r0; r < r0 + static_cast<std::size_t>(cell); ++r) {
      for (std::size_t c = c0; c < c0 + static_cast<std::size_t>(cell); ++c) {
        if (!covers(o.shape, static_cast<double>(c) - cx, static_cast<double>(r) - cy,
                    o.half_extent)) {
          continue;
        }
        for (std::size_t ch = 0; ch < 3; ++ch) {
          image.at(r, c, ch) = std::clamp(o.color[ch], 0.0, 1.0);
        }
      }
    }
  }
  return image;
}

void BenchmarkConfig::validate() const {
  SceneSpec probe{image_size, grid_size, num_classes, {}, 0};
  probe.validate();
  if (source_count < 1 || target_count < 1) {
    throw InvalidArgument("benchmark needs at least one source and one target scene");
  }
  if (min_objects < 0 || max_objects < min_objects || max_objects > grid_size * grid_size) {
    throw InvalidArgument("object count range must satisfy 0 <= min <= max <= cells");
  }
  translator_fog.validate();
  target_fog.validate();
  if (!std::isfinite(target_fog_jitter) || target_fog_jitter < 0.0) {
    throw InvalidArgument("target_fog_jitter must be finite and non-negative");
  }
}

int class_count_with_background(const BenchmarkConfig& config) { return config.num_classes + 1; }

SceneSpec random_scene(const BenchmarkConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  SceneSpec spec;
  spec.image_size = config.image_size;
  spec.grid_size = config.grid_size;
  spec.num_classes = config.num_classes;
  spec.background_seed = rng();

  const auto cells = static_cast<std::size_t>(config.grid_size * config.grid_size);
  const auto count = static_cast<std::size_t>(config.min_objects) +
                     uniform_index(rng, static_cast<std::size_t>(config.max_objects - config.min_objects + 1));
  std::vector<int> order(cells);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < count; ++i) {
    std::swap(order[i], order[i + uniform_index(rng, cells - i)]);
  }

  const double cell = spec.cell_size();
  for (std::size_t i = 0; i < count; ++i) {
    SceneObject o;
    o.row = order[i] / config.grid_size;
    o.col = order[i] % config.grid_size;
    o.class_id = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(config.num_classes)));
    o.shape = static_cast<ObjectShape>(o.class_id % 4);
    // Hue is independent of class: only the shape identifies it.
    o.color = hue_color(uniform_real(rng, 0.0, 6.0));
    o.half_extent = uniform_real(rng, 0.28, 0.42) * cell;
    o.offset_x = uniform_real(rng, -0.08, 0.08) * cell;
    o.offset_y = uniform_real(rng, -0.08, 0.08) * cell;
    spec.objects.push_back(o);
  }
  return spec;
}

// ---------------------------------------------------------------- target set

TargetSet::TargetSet(std::vector<std::string> names, std::vector<ImageBuffer> images,
                     std::vector<Annotations> annotations)
    : names_(std::move(names)), images_(std::move(images)), annotations_(std::move(annotations)) {
  if (names_.size() != images_.size() || images_.size() != annotations_.size()) {
    throw InvalidArgument("target set components differ in length");
  }
}

TargetSet::TargetSet(const TargetSet& other)
    : names_(other.names_), images_(other.images_), annotations_(other.annotations_) {}

TargetSet& TargetSet::operator=(const TargetSet& other) {
  if (this != &other) {
    names_ = other.names_;
    images_ = other.images_;
    annotations_ = other.annotations_;
    reads_ = 0;
  }
  return *this;
}

TargetSet::TargetSet(TargetSet&& other) noexcept
    : names_(std::move(other.names_)),
      images_(std::move(other.images_)),
      annotations_(std::move(other.annotations_)),
      reads_(other.reads_.load()) {}

TargetSet& TargetSet::operator=(TargetSet&& other) noexcept {
  names_ = std::move(other.names_);
  images_ = std::move(other.images_);
  annotations_ = std::move(other.annotations_);
  reads_ = other.reads_.load();
  return *this;
}

const Annotations& TargetSet::evaluation_annotations(std::size_t i) const {
  ++reads_;
  return annotations_.at(i);
}

// ---------------------------------------------------------------- generation

namespace {

constexpr std::uint64_t kTargetStream = 0x7461726765740000ULL;  // "target"

std::string scene_name(const char* prefix, std::size_t i) {
  std::ostringstream name;
  name << prefix << '_' << std::setw(4) << std::setfill('0') << i;
  return name.str();
}

}  // namespace

Benchmark generate_benchmark(const BenchmarkConfig& config) {
  config.validate();
  Benchmark bench;
  bench.config = config;

  const auto n_source = static_cast<std::int64_t>(config.source_count);
  bench.sources.resize(static_cast<std::size_t>(n_source));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_source; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const SceneSpec spec = random_scene(config, derive_seed(config.seed, idx));
    FogParams fog = config.translator_fog;
    fog.seed = derive_seed(config.translator_fog.seed, idx);
    SourceSample& s = bench.sources[static_cast<std::size_t>(i)];
    s.name = scene_name("scene", static_cast<std::size_t>(i));
    s.image = render_scene(spec);
    s.translated = fog_translate(s.image, fog, Execution::serial);
    s.annotations = spec.annotations();
  }

  const auto n_target = static_cast<std::int64_t>(config.target_count);
  std::vector<std::string> names(static_cast<std::size_t>(n_target));
  std::vector<ImageBuffer> images(static_cast<std::size_t>(n_target));
  std::vector<Annotations> annotations(static_cast<std::size_t>(n_target));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_target; ++i) {
    const auto idx = static_cast<std::uint64_t>(i);
    const std::uint64_t scene_seed = derive_seed(config.seed ^ kTargetStream, idx);
    const SceneSpec spec = random_scene(config, scene_seed);
    FogParams fog = config.target_fog;
    fog.seed = derive_seed(config.target_fog.seed, idx);
    if (config.target_fog_jitter > 0.0) {
      const double u = counter_uniform(scene_seed, 0xf06ULL);
      fog.fog_strength = std::clamp(
          fog.fog_strength + config.target_fog_jitter * (2.0 * u - 1.0), 0.0, 1.0);
    }
    const auto k = static_cast<std::size_t>(i);
    names[k] = scene_name("target", k);
    images[k] = fog_translate(render_scene(spec), fog, Execution::serial);
    annotations[k] = spec.annotations();
  }
  bench.targets = TargetSet(std::move(names), std::move(images), std::move(annotations));
  return bench;
}

// ---------------------------------------------------------------- files

void validate_annotations(const Annotations& annotations, int grid_size, int num_classes) {
  for (const auto& a : annotations) {
    if (a.row < 0 || a.row >= grid_size || a.col < 0 || a.col >= grid_size) {
      throw InvalidArgument("annotation cell (" + std::to_string(a.row) + ", " +
                            std::to_string(a.col) + ") is outside the " +
                            std::to_string(grid_size) + "x" + std::to_string(grid_size) + " grid");
    }
    if (a.class_id < 0 || a.class_id >= num_classes) {
      throw InvalidArgument("annotation class " + std::to_string(a.class_id) + " out of range");
    }
  }
}

void write_annotations(const Annotations& annotations, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write annotations: " + path.string());
  }
  for (const auto& a : annotations) {
    out << a.row << ' ' << a.col << ' ' << a.class_id << '\n';
  }
}

Annotations read_annotations(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read annotations: " + path.string());
  }
  Annotations out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    std::istringstream fields(line);
    Annotation a;
    if (!(fields >> a.row >> a.col >> a.class_id)) {
      throw IoError("malformed annotation line in " + path.string() + ": '" + line + "'");
    }
    out.push_back(a);
  }
  return out;
}

void save_benchmark(const Benchmark& bench, const fs::path& root) {
  fs::create_directories(root / "source");
  fs::create_directories(root / "target");
  std::vector<SampleRecord> records;
  for (const auto& s : bench.sources) {
    SampleRecord r;
    r.role = SampleRole::source;
    r.source_path = "source/" + s.name + ".png";
    r.translated_path = "source/" + s.name + ".translated.png";
    r.annotations = s.annotations;
    records.push_back(std::move(r));
  }
  for (std::size_t i = 0; i < bench.targets.size(); ++i) {
    SampleRecord r;
    r.role = SampleRole::target;
    r.source_path = "target/" + bench.targets.name(i) + ".png";
    r.domain_label = 1.0;
    r.delta_at_creation = 1.0;
    records.push_back(std::move(r));
  }

  const auto n_source = static_cast<std::int64_t>(bench.sources.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_source; ++i) {
    const auto& s = bench.sources[static_cast<std::size_t>(i)];
    write_image(s.image, root / "source" / (s.name + ".png"));
    write_image(s.translated, root / "source" / (s.name + ".translated.png"));
    write_annotations(s.annotations, root / "source" / (s.name + ".anno"));
  }
  const auto n_target = static_cast<std::int64_t>(bench.targets.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n_target; ++i) {
    const auto k = static_cast<std::size_t>(i);
    write_image(bench.targets.image(k), root / "target" / (bench.targets.name(k) + ".png"));
  }
  // Held-out labels go to sidecars only; the manifest's target rows carry none.
  for (std::size_t k = 0; k < bench.targets.size(); ++k) {
    write_annotations(bench.targets.evaluation_annotations(k),
                      root / "target" / (bench.targets.name(k) + ".anno"));
  }
  write_manifest(root / "benchmark.manifest", records);
}

Benchmark load_benchmark(const fs::path& root) {
  const auto records = read_manifest(root / "benchmark.manifest");
  Benchmark bench;
  std::vector<std::string> names;
  std::vector<ImageBuffer> images;
  std::vector<Annotations> annotations;
  for (const auto& r : records) {
    const fs::path src = root / r.source_path;
    auto stem = src.filename().string();
    stem = stem.substr(0, stem.size() - 4);
    if (r.role == SampleRole::source) {
      SourceSample s;
      s.name = stem;
      s.image = read_image(src);
      s.translated = read_image(root / r.translated_path);
      s.annotations = r.annotations;
      if (!s.image.same_shape(s.translated)) {
        throw ShapeError("translated image shape differs from its source: " + src.string());
      }
      bench.sources.push_back(std::move(s));
    } else if (r.role == SampleRole::target) {
      names.push_back(stem);
      images.push_back(read_image(src));
      fs::path anno = src;
      anno.replace_extension(".anno");
      annotations.push_back(fs::exists(anno) ? read_annotations(anno) : Annotations{});
    }
  }
  if (bench.sources.empty() || images.empty()) {
    throw IoError("benchmark at " + root.string() + " needs source and target records");
  }
  bench.targets = TargetSet(std::move(names), std::move(images), std::move(annotations));
  bench.config.image_size = static_cast<int>(bench.sources.front().image.height());
  bench.config.source_count = static_cast<int>(bench.sources.size());
  bench.config.target_count = static_cast<int>(bench.targets.size());
  return bench;
}

// ---------------------------------------------------------------- pairing

std::pair<BlendedSample, SourceTargetMixSample> pair_for_iteration(
    const std::vector<SourceSample>& sources, const TargetSet& targets, double delta,
    std::mt19937_64& rng) {
  if (sources.empty() || targets.empty()) {
    throw InvalidArgument("pair_for_iteration needs non-empty source and target sets");
  }
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw InvalidArgument("delta must lie in [0, 1]");
  }
  const std::size_t s = uniform_index(rng, sources.size());
  const std::size_t t = uniform_index(rng, targets.size());
  const SourceSample& source = sources[s];

  BlendedSample blended{blend_images(source.image, source.translated, delta, Execution::serial),
                        source.annotations, delta, delta, s};
  SourceTargetMixSample mix{
      blend_source_target(source.image, targets.image(t), delta, Execution::serial), delta, delta,
      s, t};
  return {std::move(blended), std::move(mix)};
}

}  // namespace blenda
