#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "blenda/dataset.hpp"
#include "blenda/losses.hpp"
#include "blenda/model.hpp"
#include "blenda/optimizer.hpp"
#include "blenda/schedule.hpp"

namespace blenda {

enum class AdversarialMode {
  /// Blended sample labelled 0, raw target sample labelled 1.
  hard,
  /// Blended and source-target mix samples both labelled delta.
  mixed,
};

std::string_view to_string(AdversarialMode mode);
AdversarialMode parse_adversarial_mode(std::string_view text);

struct AdaptationConfig {
  ModelConfig model;
  LossWeights loss_weights;
  /// alpha and beta of the dynamic mixing weight; total_iterations is
  /// taken from finetune_iterations.
  double schedule_alpha = 20.0;
  /// Below 1 so the default translator's objects stay visible at the cap.
  double schedule_beta = 0.85;
  /// When set, delta is held at this value for the whole fine-tuning run.
  std::optional<double> static_delta;
  AdversarialMode adversarial_mode = AdversarialMode::mixed;

  int pretrain_epochs = 5;
  ad::AdamWConfig pretrain_optimizer{1e-3, 1e-4, 0.9, 0.999, 1e-8};
  /// Pretraining sees raw target images with hard labels when set.
  bool pretrain_adversarial = true;

  std::int64_t finetune_iterations = 3000;
  ad::AdamWConfig finetune_optimizer{2e-5, 1e-4, 0.9, 0.999, 1e-8};

  std::uint64_t seed = 7;

  void validate() const;
  BlendSchedule schedule() const { return {schedule_alpha, schedule_beta, finetune_iterations}; }
};

/// Everything a run needs to continue: weights, optimizer moments, the
/// iteration counter and the running epoch accumulators.
struct TrainingState {
  DetectorModel detector;
  DiscriminatorBank discriminators;
  ad::AdamWState detector_optimizer;
  ad::AdamWState discriminator_optimizer;
  std::int64_t iteration = 0;

  struct Accumulator {
    double l_sup = 0.0, l_sp = 0.0, l_ch = 0.0, l_ins = 0.0;
    std::int64_t steps = 0;
  } accumulator;
  double best_map = -1.0;

  /// Fresh weights and zero optimizer state derived from `seed`.
  static TrainingState initialize(const ModelConfig& model, std::uint64_t seed);

  std::vector<ad::Parameter*> all_parameters();
};

/// Checkpoint round-trip in the shape-prefixed binary format. Loading
/// rebuilds the model from `model` and throws IoError naming the first
/// array whose shape disagrees.
void save_checkpoint(TrainingState& state, const std::filesystem::path& path);
TrainingState load_checkpoint(const std::filesystem::path& path, const ModelConfig& model);

/// One iteration's images and labels.
struct StepInputs {
  const ImageBuffer* supervised_image = nullptr;
  const Annotations* annotations = nullptr;
  double supervised_label = 0.0;
  const ImageBuffer* adversarial_image = nullptr;
  double adversarial_label = 1.0;
  double delta = 0.0;
};

/// Per-step loss values. l_sp/l_ch/l_ins are the adversarial
/// log-likelihoods (<= 0), averaged over the two samples.
struct StepLosses {
  double l_sup = 0.0;
  double l_sp = 0.0;
  double l_ch = 0.0;
  double l_ins = 0.0;
  double total = 0.0;
  double delta = 0.0;
};

/// Adversarial log-likelihood of one level over both samples, recorded on
/// `tape`. With `through_grl` the query passes a gradient reversal layer.
ad::Var adversarial_term(ad::Tape& tape, DiscriminatorBank& discriminators, AlignmentLevel level,
                         const QueryFeatures& supervised, double supervised_label,
                         const QueryFeatures& adversarial, double adversarial_label,
                         bool through_grl);

/// One joint update. The backward objective is
///   L_sup - sum_l lambda_l * L_adv^l(grl(q_l)),
/// so discriminators ascend the adversarial log-likelihood while the gradient
/// reversal makes the detector descend it, in a single pass. Discriminators
/// are not updated when every lambda is zero. Throws NonFiniteError naming
/// the offending term.
StepLosses train_step(TrainingState& state, const StepInputs& inputs,
                      const LossWeights& weights, const ad::AdamWConfig& optimizer,
                      int num_classes);

struct EpochMetrics {
  int epoch = 0;
  double l_sup = 0.0;
  double l_sp = 0.0;
  double l_ch = 0.0;
  double l_ins = 0.0;
  double delta = 0.0;
  double map = 0.0;
};

/// Header `epoch,l_sup,l_sp,l_ch,l_ins,delta,map`, 17 significant digits.
void write_metrics_csv(std::ostream& out, std::span<const EpochMetrics> rows);

struct RunOptions {
  /// Stop before this iteration (exclusive); for interrupt/resume.
  std::optional<std::int64_t> stop_at;
  /// Called once per iteration with the iteration index and the delta used.
  std::function<void(std::int64_t, double)> on_iteration;
  /// Score each finished epoch on the target set (needs held-out labels).
  bool evaluate_epochs = true;
};

struct RunResult {
  std::vector<EpochMetrics> metrics;
  /// Snapshot with the best epoch mAP seen so far (fine-tuning only).
  std::optional<TrainingState> best;
};

/// Initial training on raw source images, plus raw target images with hard
/// labels when `pretrain_adversarial` is set. Runs pretrain_epochs passes of
/// |source| iterations.
RunResult pretrain(TrainingState& state, const AdaptationConfig& config, const Benchmark& data,
                   const RunOptions& options = {});

/// Intermediate-domain fine-tuning: each iteration draws delta from the
/// schedule (or static_delta), blends a source with its translated pair and
/// with a random target, and takes one train_step. Continues from
/// state.iteration, so a run resumed from a checkpoint matches an
/// uninterrupted one.
RunResult finetune_blenda(TrainingState& state, const AdaptationConfig& config,
                          const Benchmark& data, const RunOptions& options = {});

/// Mixing weight used at `iteration` of a fine-tuning run.
double delta_for_iteration(const AdaptationConfig& config, std::int64_t iteration);

}  // namespace blenda
