#pragma once

#include <span>
#include <vector>

#include "blenda/dataset.hpp"
#include "blenda/model.hpp"

namespace blenda {

struct ScoredItem {
  double score = 0.0;
  bool positive = false;
};

/// Area under the all-points interpolated precision-recall curve.
///
/// Items are ranked by descending score. Items sharing a score form one
/// group: precision and recall are taken only after the whole group, so the
/// result does not depend on the order of tied items. Returns NaN when there
/// are no positives.
double average_precision(std::span<const ScoredItem> items);

struct EvaluationResult {
  /// NaN for classes without any positive cell.
  std::vector<double> class_ap;
  /// Unweighted mean over classes that have positives.
  double mean_ap = 0.0;
};

/// Mean AP from per-class score lists; throws InvalidArgument if no class
/// has a positive.
EvaluationResult summarize(const std::vector<std::vector<ScoredItem>>& per_class);

/// Cell-level AP per object class using softmax class probabilities as
/// scores over every cell of every target image. Reads the held-out target
/// annotations. Throws InvalidArgument on an empty set.
EvaluationResult evaluate(DetectorModel& model, const TargetSet& targets);

/// Softmax probabilities (cells x classes+1) for one image.
ad::Matrix predict(DetectorModel& model, const ImageBuffer& image);

}  // namespace blenda
