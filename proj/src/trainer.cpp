#include "blenda/trainer.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>

#include "blenda/checkpoint.hpp"
#include "blenda/error.hpp"
#include "blenda/evaluate.hpp"
#include "blenda/rng.hpp"

namespace blenda {

namespace {
constexpr std::uint64_t kPretrainStream = 0x707265747261696eULL;
constexpr std::uint64_t kFinetuneStream = 0x66696e6574756e65ULL;
constexpr std::uint64_t kInitStream = 0x696e6974ULL;
}  // namespace

std::string_view to_string(AdversarialMode mode) {
  return mode == AdversarialMode::hard ? "hard" : "mixed";
}

AdversarialMode parse_adversarial_mode(std::string_view text) {
  if (text == "hard") return AdversarialMode::hard;
  if (text == "mixed") return AdversarialMode::mixed;
  throw InvalidArgument("adversarial_mode must be 'hard' or 'mixed', got '" + std::string(text) + "'");
}

void AdaptationConfig::validate() const {
  model.validate();
  loss_weights.validate();
  BlendSchedule{schedule_alpha, schedule_beta, std::max<std::int64_t>(finetune_iterations, 1)}
      .validate();
  if (static_delta && !(*static_delta >= 0.0 && *static_delta <= 1.0)) {
    throw InvalidArgument("static_delta must lie in [0, 1]");
  }
  if (pretrain_epochs < 0) {
    throw InvalidArgument("pretrain_epochs must be non-negative");
  }
  if (finetune_iterations < 1) {
    throw InvalidArgument("finetune_iterations must be >= 1");
  }
  pretrain_optimizer.validate();
  finetune_optimizer.validate();
}

// ---------------------------------------------------------------- state

TrainingState TrainingState::initialize(const ModelConfig& model, std::uint64_t seed) {
  TrainingState s;
  const std::uint64_t base = derive_seed(seed, kInitStream);
  s.detector = DetectorModel(model, derive_seed(base, 1));
  s.discriminators = DiscriminatorBank(model, derive_seed(base, 2));
  s.detector_optimizer = ad::AdamWState::zeros_like(s.detector.parameters());
  s.discriminator_optimizer = ad::AdamWState::zeros_like(s.discriminators.parameters());
  return s;
}

std::vector<ad::Parameter*> TrainingState::all_parameters() {
  auto out = detector.parameters();
  for (auto* p : discriminators.parameters()) out.push_back(p);
  return out;
}

void save_checkpoint(TrainingState& state, const std::filesystem::path& path) {
  std::vector<ad::Matrix> arrays;
  arrays.emplace_back(1, 9,
                      std::vector<double>{static_cast<double>(state.iteration),
                                          static_cast<double>(state.detector_optimizer.step),
                                          static_cast<double>(state.discriminator_optimizer.step),
                                          state.accumulator.l_sup, state.accumulator.l_sp,
                                          state.accumulator.l_ch, state.accumulator.l_ins,
                                          static_cast<double>(state.accumulator.steps),
                                          state.best_map});
  for (auto* p : state.all_parameters()) arrays.push_back(p->value);
  for (const auto* opt : {&state.detector_optimizer, &state.discriminator_optimizer}) {
    for (const auto& m : opt->first_moment) arrays.push_back(m);
    for (const auto& v : opt->second_moment) arrays.push_back(v);
  }
  ad::write_arrays(path, arrays);
}

TrainingState load_checkpoint(const std::filesystem::path& path, const ModelConfig& model) {
  auto arrays = ad::read_arrays(path);
  TrainingState state = TrainingState::initialize(model, 0);
  auto params = state.all_parameters();
  const std::size_t expected = 1 + params.size() + 2 * state.detector_optimizer.first_moment.size() +
                               2 * state.discriminator_optimizer.first_moment.size();
  if (arrays.size() != expected) {
    throw IoError("checkpoint " + path.string() + " holds " + std::to_string(arrays.size()) +
                  " arrays, model expects " + std::to_string(expected));
  }
  std::size_t next = 0;
  const ad::Matrix& meta = arrays[next++];
  if (meta.rows != 1 || meta.cols != 9) {
    throw IoError("checkpoint " + path.string() + " has a malformed header array");
  }
  auto take = [&](ad::Matrix& dst, const std::string& what) {
    ad::Matrix& src = arrays[next++];
    if (!src.same_shape(dst)) {
      throw IoError("checkpoint shape mismatch for " + what + ": file " + src.shape_string() +
                    ", model " + dst.shape_string());
    }
    dst = std::move(src);
  };
  for (auto* p : params) take(p->value, p->name);
  auto take_moments = [&](ad::AdamWState& opt, const char* tag) {
    for (auto& m : opt.first_moment) take(m, std::string(tag) + " first moment");
    for (auto& v : opt.second_moment) take(v, std::string(tag) + " second moment");
  };
  take_moments(state.detector_optimizer, "detector optimizer");
  take_moments(state.discriminator_optimizer, "discriminator optimizer");

  state.iteration = static_cast<std::int64_t>(meta.values[0]);
  state.detector_optimizer.step = static_cast<std::int64_t>(meta.values[1]);
  state.discriminator_optimizer.step = static_cast<std::int64_t>(meta.values[2]);
  state.accumulator = {meta.values[3], meta.values[4], meta.values[5], meta.values[6],
                       static_cast<std::int64_t>(meta.values[7])};
  state.best_map = meta.values[8];
  return state;
}

// ---------------------------------------------------------------- step

ad::Var adversarial_term(ad::Tape& tape, DiscriminatorBank& discriminators, AlignmentLevel level,
                         const QueryFeatures& supervised, double supervised_label,
                         const QueryFeatures& adversarial, double adversarial_label,
                         bool through_grl) {
  (void)tape;
  Discriminator& disc = discriminators.at(level);
  auto score = [&](const QueryFeatures& q, double label) {
    ad::Var query = q.at(level);
    if (through_grl) {
      query = ad::grl(query);
    }
    return adversarial_loss(disc.forward(*query.tape(), query), label);
  };
  const ad::Var a = score(supervised, supervised_label);
  const ad::Var b = score(adversarial, adversarial_label);
  return ad::scale(ad::add(a, b), 0.5);
}

StepLosses train_step(TrainingState& state, const StepInputs& inputs, const LossWeights& weights,
                      const ad::AdamWConfig& optimizer, int num_classes) {
  if (inputs.supervised_image == nullptr || inputs.annotations == nullptr) {
    throw InvalidArgument("train_step needs a supervised image and its annotations");
  }
  const bool adversarial = !weights.all_zero();
  if (adversarial && inputs.adversarial_image == nullptr) {
    throw InvalidArgument("train_step needs an adversarial image when loss weights are non-zero");
  }
  for (auto* p : state.all_parameters()) p->zero_grad();

  ad::Tape tape;
  const ModelConfig& cfg = state.detector.config();
  const auto sup_out = state.detector.forward(tape, *inputs.supervised_image);
  const ad::Var l_sup = supervised_loss(sup_out.logits, *inputs.annotations, cfg.grid_size, num_classes);

  StepLosses losses;
  losses.delta = inputs.delta;
  losses.l_sup = l_sup.item();
  if (!std::isfinite(losses.l_sup)) {
    throw NonFiniteError("non-finite supervised loss l_sup at iteration " +
                         std::to_string(state.iteration));
  }

  ad::Var objective = l_sup;
  if (adversarial) {
    const auto adv_out = state.detector.forward(tape, *inputs.adversarial_image);
    const QueryFeatures q_sup = extract_queries(sup_out, num_classes);
    const QueryFeatures q_adv = extract_queries(adv_out, num_classes);
    std::array<ad::Var, 3> terms;
    for (std::size_t i = 0; i < kAlignmentLevels.size(); ++i) {
      const AlignmentLevel level = kAlignmentLevels[i];
      terms[i] = adversarial_term(tape, state.discriminators, level, q_sup, inputs.supervised_label,
                                  q_adv, inputs.adversarial_label, true);
      const double value = terms[i].item();
      if (!std::isfinite(value)) {
        throw NonFiniteError("non-finite adversarial loss l_" + std::string(to_string(level)) +
                             " at iteration " + std::to_string(state.iteration));
      }
    }
    losses.l_sp = terms[0].item();
    losses.l_ch = terms[1].item();
    losses.l_ins = terms[2].item();
    // Discriminators maximise the log-likelihood: descend its negation.
    objective = total_loss(l_sup, ad::scale(terms[0], -1.0), ad::scale(terms[1], -1.0),
                           ad::scale(terms[2], -1.0), weights);
  }
  losses.total = total_loss(losses.l_sup, losses.l_sp, losses.l_ch, losses.l_ins, weights);
  if (!std::isfinite(losses.total)) {
    throw NonFiniteError("non-finite total loss at iteration " + std::to_string(state.iteration));
  }

  tape.backward(objective);
  ad::adamw_step(state.detector.parameters(), state.detector_optimizer, optimizer);
  if (adversarial) {
    ad::adamw_step(state.discriminators.parameters(), state.discriminator_optimizer, optimizer);
  }
  return losses;
}

// ---------------------------------------------------------------- loops

void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> rows) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "epoch,l_sup,l_sp,l_ch,l_ins,delta,map\n" << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.epoch << ',' << r.l_sup << ',' << r.l_sp << ',' << r.l_ch << ',' << r.l_ins << ','
        << r.delta << ',' << r.map << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

double delta_for_iteration(const AdaptationConfig& config, std::int64_t iteration) {
  if (config.static_delta) {
    return *config.static_delta;
  }
  const BlendSchedule schedule = config.schedule();
  return compute_delta(compute_gamma(iteration, schedule.total_iterations), schedule);
}

namespace {

struct LoopSpec {
  std::int64_t total_iterations;
  std::uint64_t stream;
  AdversarialMode mode;
  LossWeights weights;
  ad::AdamWConfig optimizer;
  bool track_best;
  std::function<double(std::int64_t)> delta_at;
};

RunResult run_loop(TrainingState& state, const LoopSpec& spec, const AdaptationConfig& config,
                   const Benchmark& data, const RunOptions& options) {
  if (data.sources.empty() || data.targets.empty()) {
    throw InvalidArgument("training needs non-empty source and target sets");
  }
  RunResult result;
  const auto epoch_size = static_cast<std::int64_t>(data.sources.size());
  const std::int64_t end = options.stop_at ? std::min(*options.stop_at, spec.total_iterations)
                                           : spec.total_iterations;
  const int num_classes = config.model.num_classes;
  double last_delta = 0.0;

  for (; state.iteration < end; ++state.iteration) {
    const std::int64_t it = state.iteration;
    const double delta = spec.delta_at(it);
    if (options.on_iteration) options.on_iteration(it, delta);

    std::mt19937_64 rng(derive_seed(config.seed ^ spec.stream, static_cast<std::uint64_t>(it)));
    auto [blended, mix] = pair_for_iteration(data.sources, data.targets, delta, rng);

    StepInputs inputs;
    inputs.supervised_image = &blended.image;
    inputs.annotations = &blended.annotations;
    inputs.delta = delta;
    if (spec.mode == AdversarialMode::mixed) {
      inputs.supervised_label = blended.domain_label;
      inputs.adversarial_image = &mix.image;
      inputs.adversarial_label = mix.domain_label;
    } else {
      inputs.supervised_label = 0.0;
      inputs.adversarial_image = &data.targets.image(mix.target_index);
      inputs.adversarial_label = 1.0;
    }
    const StepLosses losses = train_step(state, inputs, spec.weights, spec.optimizer, num_classes);
    last_delta = delta;

    auto& acc = state.accumulator;
    acc.l_sup += losses.l_sup;
    acc.l_sp += losses.l_sp;
    acc.l_ch += losses.l_ch;
    acc.l_ins += losses.l_ins;
    ++acc.steps;

    const bool epoch_done = (it + 1) % epoch_size == 0 || it + 1 == spec.total_iterations;
    if (epoch_done) {
      const double n = static_cast<double>(std::max<std::int64_t>(acc.steps, 1));
      EpochMetrics row{static_cast<int>(it / epoch_size) + 1, acc.l_sup / n, acc.l_sp / n,
                       acc.l_ch / n, acc.l_ins / n, last_delta, 0.0};
      acc = {};
      if (options.evaluate_epochs) {
        row.map = evaluate(state.detector, data.targets).mean_ap;
        if (spec.track_best && row.map > state.best_map) {
          state.best_map = row.map;
          ++state.iteration;  // snapshot resumes after this step
          result.best = state;
          --state.iteration;
        }
      }
      result.metrics.push_back(row);
    }
  }
  return result;
}

}  // namespace

RunResult pretrain(TrainingState& state, const AdaptationConfig& config, const Benchmark& data,
                   const RunOptions& options) {
  config.validate();
  LoopSpec spec{static_cast<std::int64_t>(config.pretrain_epochs) *
                    static_cast<std::int64_t>(data.sources.size()),
                kPretrainStream,
                AdversarialMode::hard,
                config.pretrain_adversarial ? config.loss_weights : LossWeights{0.0, 0.0, 0.0},
                config.pretrain_optimizer,
                false,
                [](std::int64_t) { return 0.0; }};
  state.iteration = 0;
  state.accumulator = {};
  RunResult result = run_loop(state, spec, config, data, options);
  if (state.iteration >= spec.total_iterations) {
    // Hand over to fine-tuning as a fresh stage.
    state.iteration = 0;
    state.accumulator = {};
    state.best_map = -1.0;
    state.detector_optimizer = ad::AdamWState::zeros_like(state.detector.parameters());
    state.discriminator_optimizer = ad::AdamWState::zeros_like(state.discriminators.parameters());
  }
  return result;
}

RunResult finetune_blenda(TrainingState& state, const AdaptationConfig& config,
                          const Benchmark& data, const RunOptions& options) {
  config.validate();
  LoopSpec spec{config.finetune_iterations,
                kFinetuneStream,
                config.adversarial_mode,
                config.loss_weights,
                config.finetune_optimizer,
                true,
                [&config](std::int64_t it) { return delta_for_iteration(config, it); }};
  return run_loop(state, spec, config, data, options);
}

}  // namespace blenda
