#include "blenda/optimizer.hpp"

#include <cmath>
#include <string>

#include "blenda/error.hpp"

namespace blenda::ad {

void AdamWConfig::validate() const {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(learning_rate) || !finite_nonneg(weight_decay)) {
    throw InvalidArgument("learning_rate and weight_decay must be finite and non-negative");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("optimizer betas must lie in [0, 1)");
  }
  if (!std::isfinite(eps) || eps <= 0.0) {
    throw InvalidArgument("optimizer eps must be finite and > 0");
  }
}

AdamWState AdamWState::zeros_like(std::span<Parameter* const> params) {
  AdamWState state;
  for (const Parameter* p : params) {
    state.first_moment.emplace_back(p->value.rows, p->value.cols);
    state.second_moment.emplace_back(p->value.rows, p->value.cols);
  }
  return state;
}

void adamw_step(std::span<Parameter* const> params, AdamWState& state, const AdamWConfig& config) {
  config.validate();
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ShapeError("optimizer state holds " + std::to_string(state.first_moment.size()) +
                     " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (!p.grad.same_shape(p.value) || !state.first_moment[i].same_shape(p.value) ||
        !state.second_moment[i].same_shape(p.value)) {
      throw ShapeError("optimizer shape mismatch for parameter '" + p.name + "'");
    }
    if (!p.grad.all_finite()) {
      throw NonFiniteError("non-finite gradient in parameter '" + p.name + "' at step " +
                           std::to_string(state.step + 1));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const double decay = 1.0 - config.learning_rate * config.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    auto& m = state.first_moment[i].values;
    auto& v = state.second_moment[i].values;
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad.values[k];
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g;
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g * g;
      const double m_hat = m[k] / bias1;
      const double v_hat = v[k] / bias2;
      double& theta = p.value.values[k];
      if (config.weight_decay != 0.0) {
        theta *= decay;
      }
      theta -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace blenda::ad
