#include "blenda/schedule.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "blenda/error.hpp"

namespace blenda {

void BlendSchedule::validate() const {
  if (!std::isfinite(alpha) || alpha <= 0.0) {
    throw InvalidArgument("schedule alpha must be finite and > 0, got " + std::to_string(alpha));
  }
  if (!std::isfinite(beta) || beta <= 0.0 || beta > 1.0) {
    throw InvalidArgument("schedule beta must lie in (0, 1], got " + std::to_string(beta));
  }
  if (total_iterations < 1) {
    throw InvalidArgument("schedule total_iterations must be >= 1, got " +
                          std::to_string(total_iterations));
  }
}

double compute_gamma(std::int64_t current_iteration, std::int64_t total_iterations) {
  if (total_iterations < 1) {
    throw InvalidArgument("total_iterations must be >= 1");
  }
  if (current_iteration < 0) {
    throw InvalidArgument("current_iteration must be non-negative");
  }
  if (current_iteration >= total_iterations) {
    return 1.0;
  }
  return static_cast<double>(current_iteration) / static_cast<double>(total_iterations);
}

TrainingProgress training_progress(std::int64_t current_iteration, const BlendSchedule& schedule) {
  schedule.validate();
  return {current_iteration, compute_gamma(current_iteration, schedule.total_iterations)};
}

double compute_delta(double gamma, const BlendSchedule& schedule) {
  if (!std::isfinite(schedule.alpha) || !std::isfinite(schedule.beta) || schedule.alpha <= 0.0 ||
      schedule.beta <= 0.0 || schedule.beta > 1.0) {
    throw InvalidArgument("schedule parameters must be finite with alpha > 0 and beta in (0, 1]");
  }
  if (!(gamma >= 0.0 && gamma <= 1.0)) {
    throw InvalidArgument("gamma must lie in [0, 1]");
  }
  // 2 / (1 + e^-x) - 1 == (1 - e^-x) / (1 + e^-x)
  const double em1 = std::expm1(-schedule.alpha * gamma);
  return (-em1 / (2.0 + em1)) * schedule.beta;
}

std::vector<SchedulePoint> emit_schedule_curve(const BlendSchedule& schedule, int samples) {
  if (samples < 2) {
    throw InvalidArgument("schedule curve needs at least 2 samples");
  }
  std::vector<SchedulePoint> curve;
  curve.reserve(static_cast<std::size_t>(samples));
  for (int i = 0; i < samples; ++i) {
    // last sample pinned to exactly 1
    const double gamma = i == samples - 1 ? 1.0 : static_cast<double>(i) / (samples - 1);
    curve.push_back({gamma, compute_delta(gamma, schedule)});
  }
  return curve;
}

void write_schedule_csv(std::ostream& out, std::span<const SchedulePoint> curve) {
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << "gamma,delta\n" << std::setprecision(17);
  for (const auto& p : curve) {
    out << p.gamma << ',' << p.delta << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

}  // namespace blenda
