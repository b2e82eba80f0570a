#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "blenda/autodiff.hpp"

namespace blenda::ad {

/// Decoupled weight decay Adam. Defaults follow the reference fine-tuning
/// recipe: learning rate 2e-5, weight decay 1e-4, betas (0.9, 0.999).
struct AdamWConfig {
  double learning_rate = 2e-5;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

/// First/second moment estimates, one pair per parameter, plus the step count.
struct AdamWState {
  std::int64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  /// Zero moments shaped like `params`.
  static AdamWState zeros_like(std::span<Parameter* const> params);
};

/// One update using each parameter's accumulated `grad`:
///   theta -= lr * wd * theta
///   m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
///   theta -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
/// Throws NonFiniteError naming the parameter, before touching anything, if
/// a gradient is NaN/inf. Throws ShapeError if the state does not match.
void adamw_step(std::span<Parameter* const> params, AdamWState& state, const AdamWConfig& config);

}  // namespace blenda::ad
