#include "blenda/ablation.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <thread>

#include "blenda/error.hpp"

namespace blenda {

namespace fs = std::filesystem;

namespace {

std::string delta_tag(double d) {
  std::ostringstream s;
  s << d;
  return s.str();
}

}  // namespace

std::vector<AblationVariant> ablation_variants(const AblationSettings& settings) {
  std::vector<AblationVariant> out;
  out.push_back({"source_only", true, 0.0, AdversarialMode::hard});
  for (auto mode : {AdversarialMode::hard, AdversarialMode::mixed}) {
    for (double d : settings.static_deltas) {
      out.push_back({"static_" + delta_tag(d), false, d, mode});
    }
    out.push_back({"dynamic", false, std::nullopt, mode});
  }
  return out;
}

double AblationReport::median(std::size_t variant) const {
  std::vector<double> v = map.at(variant);
  if (v.empty()) {
    throw InvalidArgument("median of an empty row");
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t AblationReport::find(const std::string& name) const {
  for (std::size_t i = 0; i < variants.size(); ++i) {
    const auto& v = variants[i];
    const std::string full = v.source_only ? v.name : v.name + "/" + std::string(to_string(v.mode));
    if (full == name) return i;
  }
  throw InvalidArgument("no ablation variant named '" + name + "'");
}

int ablation_workers_from_env() {
  if (const char* env = std::getenv("BLENDA_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long n = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || n < 1) {
      throw InvalidArgument("BLENDA_WORKERS must be a positive integer");
    }
    return static_cast<int>(n);
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

void run_jobs(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  const auto threads = static_cast<std::size_t>(std::clamp<long>(workers, 1, static_cast<long>(std::max<std::size_t>(count, 1))));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    omp_set_num_threads(1);
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    const int saved = omp_get_max_threads();
    worker();
    omp_set_num_threads(saved);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

AblationReport run_ablation(const RunConfig& config, int workers,
                            const std::optional<fs::path>& out_dir) {
  config.validate();
  AblationReport report;
  report.variants = ablation_variants(config.ablation);
  for (int i = 0; i < config.ablation.seeds; ++i) {
    report.seeds.push_back(config.seed + static_cast<std::uint64_t>(i));
  }
  const std::size_t n_seeds = report.seeds.size();
  const std::size_t n_variants = report.variants.size();
  report.map.assign(n_variants, std::vector<double>(n_seeds, 0.0));
  if (out_dir) fs::create_directories(*out_dir / "runs");

  auto write_metrics = [&](const std::string& name, const std::vector<EpochMetrics>& rows) {
    if (!out_dir) return;
    std::ofstream f(*out_dir / "runs" / (name + ".csv"), std::ios::binary);
    write_metrics_csv(f, rows);
  };

  // Phase 1: data and the two pretrained starting points per seed.
  std::vector<Benchmark> data(n_seeds);
  std::vector<TrainingState> adapted(n_seeds), source_only(n_seeds);
  run_jobs(n_seeds, workers, [&](std::size_t s) {
    RunConfig rc = config;
    rc.seed = report.seeds[s];
    rc.synchronize();
    data[s] = generate_benchmark(rc.benchmark);
  });
  run_jobs(2 * n_seeds, workers, [&](std::size_t job) {
    const std::size_t s = job / 2;
    const bool plain = job % 2 == 1;
    RunConfig rc = config;
    rc.seed = report.seeds[s];
    rc.synchronize();
    AdaptationConfig ac = rc.adaptation;
    if (plain) {
      ac.pretrain_adversarial = false;
    }
    TrainingState state = TrainingState::initialize(ac.model, ac.seed);
    const RunResult r = pretrain(state, ac, data[s]);
    write_metrics((plain ? "pretrain_source_only__seed" : "pretrain__seed") + std::to_string(rc.seed),
                  r.metrics);
    (plain ? source_only : adapted)[s] = std::move(state);
  });

  // Phase 2: one fine-tuning run per (variant, seed).
  run_jobs(n_variants * n_seeds, workers, [&](std::size_t job) {
    const std::size_t v = job / n_seeds;
    const std::size_t s = job % n_seeds;
    const AblationVariant& variant = report.variants[v];
    RunConfig rc = config;
    rc.seed = report.seeds[s];
    rc.synchronize();
    AdaptationConfig ac = rc.adaptation;
    ac.static_delta = variant.static_delta;
    ac.adversarial_mode = variant.mode;
    TrainingState state = variant.source_only ? source_only[s] : adapted[s];
    if (variant.source_only) {
      ac.loss_weights = {0.0, 0.0, 0.0};
    }
    const RunResult r = finetune_blenda(state, ac, data[s]);
    const std::string tag = variant.source_only
                                ? variant.name
                                : variant.name + "_" + std::string(to_string(variant.mode));
    write_metrics(tag + "__seed" + std::to_string(rc.seed), r.metrics);
    report.map[v][s] = r.metrics.empty() ? 0.0 : r.metrics.back().map;
  });
  return report;
}

namespace {

void write_rows(std::ostream& out, const AblationReport& report, bool baseline) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "config,mode";
  for (auto seed : report.seeds) out << ",seed_" << seed;
  out << ",median\n" << std::setprecision(17);
  for (std::size_t v = 0; v < report.variants.size(); ++v) {
    const auto& variant = report.variants[v];
    if (variant.source_only != baseline) continue;
    out << variant.name << ',' << (variant.source_only ? "none" : to_string(variant.mode));
    for (double m : report.map[v]) out << ',' << m;
    out << ',' << report.median(v) << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace

void write_ablation_table(std::ostream& out, const AblationReport& report) {
  write_rows(out, report, false);
}

void write_baseline_table(std::ostream& out, const AblationReport& report) {
  write_rows(out, report, true);
}

void write_ablation_summary(std::ostream& out, const AblationReport& report) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::fixed << std::setprecision(2);
  out << "# Ablation summary\n\n";
  out << "Median target mAP (%) over " << report.seeds.size() << " seeds.\n\n";
  out << "| delta setting | hard labels | mixed labels | mixed - hard |\n";
  out << "|---|---|---|---|\n";
  const std::size_t baseline = 0;
  out << "| source_only | " << 100.0 * report.median(baseline) << " | - | - |\n";
  for (std::size_t v = 0; v < report.variants.size(); ++v) {
    const auto& variant = report.variants[v];
    if (variant.source_only || variant.mode != AdversarialMode::hard) continue;
    const std::size_t mixed = report.find(variant.name + "/mixed");
    const double h = 100.0 * report.median(v);
    const double m = 100.0 * report.median(mixed);
    out << "| " << variant.name << " | " << h << " | " << m << " | " << std::showpos << (m - h)
        << std::noshowpos << " |\n";
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace blenda
