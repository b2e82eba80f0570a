#include "blenda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "blenda/error.hpp"

namespace blenda {

double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

double adversarial_loss_mixed(double soft_label, double disc_output) {
  if (!(soft_label >= 0.0 && soft_label <= 1.0)) {
    throw InvalidArgument("soft domain label must lie in [0, 1]");
  }
  if (std::isnan(disc_output)) {
    throw InvalidArgument("discriminator output is NaN");
  }
  const double d = clamp_probability(disc_output);
  return soft_label * std::log(d) + (1.0 - soft_label) * std::log(1.0 - d);
}

double adversarial_loss_hard(int domain_label, double disc_output) {
  if (domain_label != 0 && domain_label != 1) {
    throw InvalidArgument("hard domain label must be 0 or 1, got " + std::to_string(domain_label));
  }
  if (std::isnan(disc_output)) {
    throw InvalidArgument("discriminator output is NaN");
  }
  const double d = clamp_probability(disc_output);
  return domain_label == 1 ? std::log(d) : std::log(1.0 - d);
}

ad::Var adversarial_loss(ad::Var disc_output, double soft_label) {
  if (!(soft_label >= 0.0 && soft_label <= 1.0)) {
    throw InvalidArgument("soft domain label must lie in [0, 1]");
  }
  ad::Tape& tape = *disc_output.tape();
  const ad::Var d = ad::clamp(disc_output, kProbabilityFloor, 1.0 - kProbabilityFloor);
  const ad::Var log_d = ad::log(d);
  const ad::Var log_not_d = ad::log(ad::rsub(1.0, d));
  return ad::add(ad::mul(tape.constant(ad::Matrix::scalar(soft_label)), log_d),
                 ad::mul(tape.constant(ad::Matrix::scalar(1.0 - soft_label)), log_not_d));
}

ad::Var supervised_loss(ad::Var logits, const Annotations& annotations, int grid_size,
                        int num_classes) {
  const auto cells = static_cast<std::size_t>(grid_size * grid_size);
  const auto classes = static_cast<std::size_t>(num_classes + 1);
  if (logits.rows() != cells || logits.cols() != classes) {
    throw ShapeError("logits " + logits.value().shape_string() + " do not match a " +
                     std::to_string(grid_size) + "x" + std::to_string(grid_size) + " grid with " +
                     std::to_string(num_classes + 1) + " outputs");
  }
  validate_annotations(annotations, grid_size, num_classes);
  ad::Matrix onehot(cells, classes);
  for (std::size_t c = 0; c < cells; ++c) {
    onehot(c, classes - 1) = 1.0;
  }
  for (const auto& a : annotations) {
    const auto cell = static_cast<std::size_t>(a.row * grid_size + a.col);
    onehot(cell, classes - 1) = 0.0;
    onehot(cell, static_cast<std::size_t>(a.class_id)) = 1.0;
  }
  ad::Tape& tape = *logits.tape();
  // sum over classes, mean over cells, negated
  const ad::Var picked = ad::mul(ad::log_softmax(logits), tape.constant(std::move(onehot)));
  return ad::scale(ad::sum(picked), -1.0 / static_cast<double>(cells));
}

void LossWeights::validate() const {
  for (double w : {space, channel, instance}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidArgument("loss weights must be finite and non-negative");
    }
  }
}

ad::Var total_loss(ad::Var l_sup, ad::Var l_sp, ad::Var l_ch, ad::Var l_ins,
                   const LossWeights& weights) {
  weights.validate();
  ad::Var total = l_sup;
  total = ad::add(total, ad::scale(l_sp, weights.space));
  total = ad::add(total, ad::scale(l_ch, weights.channel));
  total = ad::add(total, ad::scale(l_ins, weights.instance));
  return total;
}

double total_loss(double l_sup, double l_sp, double l_ch, double l_ins, const LossWeights& weights) {
  weights.validate();
  return l_sup + weights.space * l_sp + weights.channel * l_ch + weights.instance * l_ins;
}

}  // namespace blenda
