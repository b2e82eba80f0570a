#pragma once

#include "blenda/autodiff.hpp"
#include "blenda/dataset.hpp"

namespace blenda {

/// Discriminator outputs are clamped to [kProbabilityFloor, 1 - kProbabilityFloor]
/// before any log.
inline constexpr double kProbabilityFloor = 1e-7;

double clamp_probability(double p);

/// d * log D + (1 - d) * log(1 - D) with a hard label d in {0, 1}.
/// Always <= 0. Throws InvalidArgument for any other d.
double adversarial_loss_hard(int domain_label, double disc_output);

/// Same form with a soft label in [0, 1]; for a fixed label it is maximal at
/// D = label.
double adversarial_loss_mixed(double soft_label, double disc_output);

/// Tape version of the (soft-label) adversarial log-likelihood for a 1x1
/// discriminator output. Clamps, then applies the formula above.
ad::Var adversarial_loss(ad::Var disc_output, double soft_label);

/// Mean per-cell cross-entropy; cells without an annotation are background
/// (class index num_classes). Throws InvalidArgument for annotations outside
/// the grid or with a bad class.
ad::Var supervised_loss(ad::Var logits, const Annotations& annotations, int grid_size,
                        int num_classes);

/// Trade-off weights of the three alignment levels.
struct LossWeights {
  double space = 0.1;
  double channel = 0.1;
  double instance = 0.1;

  void validate() const;
  bool all_zero() const { return space == 0.0 && channel == 0.0 && instance == 0.0; }
};

/// l_sup + w.space * l_sp + w.channel * l_ch + w.instance * l_ins.
ad::Var total_loss(ad::Var l_sup, ad::Var l_sp, ad::Var l_ch, ad::Var l_ins,
                   const LossWeights& weights);
double total_loss(double l_sup, double l_sp, double l_ch, double l_ins, const LossWeights& weights);

}  // namespace blenda
