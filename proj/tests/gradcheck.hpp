#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "blenda/autodiff.hpp"

namespace blenda::testing {

/// Builds a scalar from leaf Vars created for each input matrix.
using ScalarFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

inline double evaluate(const ScalarFn& fn, const std::vector<ad::Matrix>& inputs) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& m : inputs) {
    leaves.push_back(tape.constant(m));
  }
  return fn(tape, leaves).item();
}

/// Largest over inputs of ||analytic - numeric|| / (||analytic|| + ||numeric||),
/// with central differences of step h. Zero when both gradients vanish.
inline double gradcheck(const ScalarFn& fn, std::vector<ad::Matrix> inputs, double h = 1e-6) {
  ad::Tape tape;
  std::vector<ad::Var> leaves;
  for (const auto& m : inputs) {
    leaves.push_back(tape.variable(m));
  }
  tape.backward(fn(tape, leaves));

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const ad::Matrix analytic = leaves[k].grad();
    double diff2 = 0.0;
    double a2 = 0.0;
    double n2 = 0.0;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double x = inputs[k].values[i];
      inputs[k].values[i] = x + h;
      const double up = evaluate(fn, inputs);
      inputs[k].values[i] = x - h;
      const double down = evaluate(fn, inputs);
      inputs[k].values[i] = x;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic.values[i] - numeric) * (analytic.values[i] - numeric);
      a2 += analytic.values[i] * analytic.values[i];
      n2 += numeric * numeric;
    }
    const double denom = std::sqrt(a2) + std::sqrt(n2);
    if (denom > 0.0) {
      worst = std::max(worst, std::sqrt(diff2) / denom);
    }
  }
  return worst;
}

}  // namespace blenda::testing
