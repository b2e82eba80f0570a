// blenda: command-line entry point for the intermediate-domain adaptation
// pipeline. Every command reads one JSON config (flags override it), writes
// into a fresh timestamped run directory and echoes the resolved config there.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "blenda/ablation.hpp"
#include "blenda/config.hpp"
#include "blenda/error.hpp"
#include "blenda/evaluate.hpp"
#include "blenda/manifest.hpp"
#include "blenda/png_io.hpp"
#include "blenda/rng.hpp"
#include "blenda/schedule.hpp"
#include "blenda/trainer.hpp"

namespace fs = std::filesystem;
using namespace blenda;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> dataset;
  std::optional<std::string> checkpoint;
  std::optional<double> delta;
  std::optional<int> samples;
  std::optional<std::int64_t> stop_at;
};

RunConfig resolve(const GlobalOptions& opts) {
  RunConfig cfg = opts.config_path.empty() ? parse_run_config(nlohmann::json::object())
                                           : load_run_config(opts.config_path);
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.out) cfg.output_dir = *opts.out;
  if (opts.dataset) cfg.dataset_root = *opts.dataset;
  if (opts.checkpoint) cfg.checkpoint = *opts.checkpoint;
  if (opts.delta) cfg.blend_delta = *opts.delta;
  if (opts.samples) cfg.schedule_samples = *opts.samples;
  if (opts.stop_at) cfg.stop_at = *opts.stop_at;
  cfg.synchronize();
  cfg.validate();
  return cfg;
}

fs::path make_run_dir(const RunConfig& cfg, const std::string& command) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << command << '-' << std::put_time(&tm, "%Y%m%d-%H%M%S");
  fs::path dir = fs::path(cfg.output_dir) / stamp.str();
  for (int n = 1; fs::exists(dir); ++n) {
    dir = fs::path(cfg.output_dir) / (stamp.str() + "-" + std::to_string(n));
  }
  fs::create_directories(dir);
  std::ofstream(dir / "resolved_config.json") << to_json(cfg).dump(2) << '\n';
  return dir;
}

fs::path require_dataset(const RunConfig& cfg) {
  if (cfg.dataset_root.empty()) {
    throw InvalidArgument("this command needs a dataset (--dataset or dataset_root)");
  }
  const fs::path root(cfg.dataset_root);
  if (!fs::exists(root / "benchmark.manifest")) {
    throw IoError("no benchmark.manifest under " + root.string());
  }
  return root;
}

fs::path require_checkpoint(const RunConfig& cfg) {
  if (cfg.checkpoint.empty()) {
    throw InvalidArgument("this command needs a checkpoint (--checkpoint or checkpoint)");
  }
  if (!fs::exists(cfg.checkpoint)) {
    throw IoError("checkpoint not found: " + cfg.checkpoint);
  }
  return cfg.checkpoint;
}

void write_metrics(const fs::path& path, const std::vector<EpochMetrics>& rows) {
  std::ofstream out(path, std::ios::binary);
  write_metrics_csv(out, rows);
}

// ---------------------------------------------------------------- commands

void cmd_schedule(const RunConfig& cfg, const fs::path& dir) {
  const BlendSchedule schedule = cfg.adaptation.schedule();
  const auto curve = emit_schedule_curve(schedule, cfg.schedule_samples);
  std::ofstream out(dir / "schedule.csv", std::ios::binary);
  write_schedule_csv(out, curve);
}

void cmd_generate(const RunConfig& cfg, const fs::path& dir) {
  save_benchmark(generate_benchmark(cfg.benchmark), dir / "dataset");
}

void cmd_translate(const RunConfig& cfg, const fs::path& dir) {
  const fs::path root = require_dataset(cfg);
  const auto records = read_manifest(root / "benchmark.manifest");
  fs::create_directories(dir / "translated");
  std::vector<SampleRecord> out;
  std::uint64_t index = 0;
  for (const auto& r : records) {
    if (r.role != SampleRole::source) continue;
    FogParams fog = cfg.benchmark.translator_fog;
    fog.seed = derive_seed(fog.seed, index++);
    const fs::path src = root / r.source_path;
    const std::string stem = src.stem().string();
    write_image(fog_translate(read_image(src), fog), dir / "translated" / (stem + ".translated.png"));
    SampleRecord t;
    t.role = SampleRole::translated;
    t.source_path = fs::relative(src, dir).string();
    t.translated_path = "translated/" + stem + ".translated.png";
    t.annotations = r.annotations;
    out.push_back(std::move(t));
  }
  write_manifest(dir / "translated.manifest", out);
}

void cmd_blend(const RunConfig& cfg, const fs::path& dir) {
  const fs::path root = require_dataset(cfg);
  const auto records = read_manifest(root / "benchmark.manifest");
  fs::create_directories(dir / "blended");
  std::vector<SampleRecord> out;
  for (const auto& r : records) {
    if (r.role != SampleRole::source) continue;
    const fs::path src = root / r.source_path;
    const std::string stem = src.stem().string();
    const ImageBuffer blended =
        blend_images(read_image(src), read_image(root / r.translated_path), cfg.blend_delta);
    write_image(blended, dir / "blended" / (stem + ".blended.png"));
    write_annotations(r.annotations, dir / "blended" / (stem + ".anno"));
    SampleRecord b;
    b.role = SampleRole::blended;
    b.source_path = fs::relative(src, dir).string();
    b.translated_path = fs::relative(root / r.translated_path, dir).string();
    b.blended_path = "blended/" + stem + ".blended.png";
    b.annotations = r.annotations;
    b.domain_label = cfg.blend_delta;
    b.delta_at_creation = cfg.blend_delta;
    out.push_back(std::move(b));
  }
  write_manifest(dir / "blended.manifest", out);
}

void cmd_pretrain(const RunConfig& cfg, const fs::path& dir) {
  const Benchmark data = load_benchmark(require_dataset(cfg));
  TrainingState state = TrainingState::initialize(cfg.adaptation.model, cfg.seed);
  const RunResult r = pretrain(state, cfg.adaptation, data);
  write_metrics(dir / "metrics.csv", r.metrics);
  save_checkpoint(state, dir / "pretrained.ckpt");
}

void cmd_finetune(const RunConfig& cfg, const fs::path& dir) {
  const Benchmark data = load_benchmark(require_dataset(cfg));
  TrainingState state = load_checkpoint(require_checkpoint(cfg), cfg.adaptation.model);
  RunOptions options;
  options.stop_at = cfg.stop_at;
  RunResult r = finetune_blenda(state, cfg.adaptation, data, options);
  write_metrics(dir / "metrics.csv", r.metrics);
  save_checkpoint(state, dir / "final.ckpt");
  if (r.best) {
    save_checkpoint(*r.best, dir / "best.ckpt");
  }
}

void cmd_eval(const RunConfig& cfg, const fs::path& dir) {
  const Benchmark data = load_benchmark(require_dataset(cfg));
  TrainingState state = load_checkpoint(require_checkpoint(cfg), cfg.adaptation.model);
  const EvaluationResult result = evaluate(state.detector, data.targets);
  std::ofstream out(dir / "eval.csv", std::ios::binary);
  out << "class,ap\n" << std::setprecision(17);
  for (std::size_t k = 0; k < result.class_ap.size(); ++k) {
    out << k << ',' << result.class_ap[k] << '\n';
  }
  out << "mean," << result.mean_ap << '\n';
  std::cout << "mAP " << std::fixed << std::setprecision(4) << result.mean_ap << '\n';
}

void cmd_ablate(const RunConfig& cfg, const fs::path& dir) {
  const AblationReport report = run_ablation(cfg, ablation_workers_from_env(), dir);
  std::ofstream table(dir / "ablation.csv", std::ios::binary);
  write_ablation_table(table, report);
  std::ofstream baseline(dir / "baseline.csv", std::ios::binary);
  write_baseline_table(baseline, report);
  std::ofstream summary(dir / "summary.md", std::ios::binary);
  write_ablation_summary(summary, report);
  write_ablation_summary(std::cout, report);
}

int exit_code_for(const std::exception& e, std::string& kind) {
  if (dynamic_cast<const InvalidArgument*>(&e) || dynamic_cast<const ShapeError*>(&e)) {
    kind = "invalid";
    return 2;
  }
  if (dynamic_cast<const IoError*>(&e)) {
    kind = "io";
    return 3;
  }
  if (dynamic_cast<const NonFiniteError*>(&e)) {
    kind = "nonfinite";
    return 4;
  }
  kind = "internal";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"blenda: intermediate-domain blending for domain adaptive detection"};
  app.require_subcommand(1);
  GlobalOptions opts;
  app.add_option("--config", opts.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", opts.seed, "Seed for data generation and training");
  app.add_option("--out", opts.out, "Parent directory for run directories");
  app.add_option("--dataset", opts.dataset, "Benchmark directory (contains benchmark.manifest)");

  using Handler = void (*)(const RunConfig&, const fs::path&);
  std::vector<std::pair<CLI::App*, Handler>> commands;
  commands.emplace_back(app.add_subcommand("schedule", "Write the mixing-weight curve as CSV"), cmd_schedule);
  commands.back().first->add_option("--samples", opts.samples, "Number of curve points");
  commands.emplace_back(app.add_subcommand("generate", "Build the synthetic fog benchmark"), cmd_generate);
  commands.emplace_back(app.add_subcommand("translate", "Fog-translate the source set"), cmd_translate);
  commands.emplace_back(app.add_subcommand("blend", "Materialize a fixed-delta blended set"), cmd_blend);
  commands.back().first->add_option("--delta", opts.delta, "Mixing weight in [0, 1]");
  commands.emplace_back(app.add_subcommand("pretrain", "Source + hard-label adversarial pretraining"), cmd_pretrain);
  commands.emplace_back(app.add_subcommand("finetune", "Blended fine-tuning from a checkpoint"), cmd_finetune);
  commands.back().first->add_option("--checkpoint", opts.checkpoint, "Checkpoint to start from");
  commands.back().first->add_option("--stop-at", opts.stop_at, "Stop before this iteration");
  commands.emplace_back(app.add_subcommand("eval", "Target-set AP of a checkpoint"), cmd_eval);
  commands.back().first->add_option("--checkpoint", opts.checkpoint, "Checkpoint to evaluate");
  commands.emplace_back(app.add_subcommand("ablate", "Delta-setting x adversarial-loss ablation"), cmd_ablate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto& [sub, handler] : commands) {
      if (!sub->parsed()) continue;
      const RunConfig cfg = resolve(opts);
      const fs::path dir = make_run_dir(cfg, sub->get_name());
      handler(cfg, dir);
      std::cout << dir.string() << '\n';
    }
  } catch (const std::exception& e) {
    std::string kind;
    const int code = exit_code_for(e, kind);
    std::string message = e.what();
    for (auto& ch : message) {
      if (ch == '\n') ch = ' ';
    }
    std::cerr << "blenda: error: " << kind << ": " << message << '\n';
    return code;
  }
  return 0;
}
