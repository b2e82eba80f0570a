#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace blenda {

/// Governs the dynamic mixing weight over a training run.
///
/// `alpha` controls how fast the weight ramps up, `beta` is its upper bound
/// and `total_iterations` the number of optimizer steps the ramp spans.
struct BlendSchedule {
  double alpha = 20.0;
  double beta = 1.0;
  std::int64_t total_iterations = 1;

  /// Throws InvalidArgument unless alpha > 0, 0 < beta <= 1 and
  /// total_iterations >= 1, all finite.
  void validate() const;
};

struct TrainingProgress {
  std::int64_t current_iteration = 0;
  double gamma = 0.0;
};

/// Fraction of training completed: min(current / total, 1). Iterations are
/// 0-based, so the first optimizer step sees gamma = 0.
double compute_gamma(std::int64_t current_iteration, std::int64_t total_iterations);

TrainingProgress training_progress(std::int64_t current_iteration, const BlendSchedule& schedule);

/// Mixing weight (2 / (1 + exp(-alpha * gamma)) - 1) * beta.
///
/// Evaluated as -expm1(-x) / (2 + expm1(-x)) with x = alpha * gamma, which is
/// the same expression rearranged to avoid cancellation near gamma = 0. The
/// result equals beta * tanh(x / 2) and stays strictly below beta while
/// exp(-x) is representable relative to 1 (x below ~36).
double compute_delta(double gamma, const BlendSchedule& schedule);

struct SchedulePoint {
  double gamma = 0.0;
  double delta = 0.0;
};

/// `samples` evenly spaced gammas over [0, 1] with their deltas.
std::vector<SchedulePoint> emit_schedule_curve(const BlendSchedule& schedule, int samples);

/// Writes a `gamma,delta` header and one row per point, 17 significant digits.
void write_schedule_csv(std::ostream& out, std::span<const SchedulePoint> curve);

}  // namespace blenda
