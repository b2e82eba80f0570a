#include "blenda/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "blenda/error.hpp"

namespace blenda {

double average_precision(std::span<const ScoredItem> items) {
  std::vector<ScoredItem> ranked(items.begin(), items.end());
  const auto positives = std::count_if(ranked.begin(), ranked.end(),
                                       [](const ScoredItem& s) { return s.positive; });
  if (positives == 0) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const ScoredItem& a, const ScoredItem& b) { return a.score > b.score; });

  // (recall, precision) after each tie group
  std::vector<double> recall;
  std::vector<double> precision;
  std::size_t tp = 0;
  std::size_t seen = 0;
  for (std::size_t i = 0; i < ranked.size();) {
    std::size_t j = i;
    while (j < ranked.size() && ranked[j].score == ranked[i].score) {
      tp += ranked[j].positive ? 1 : 0;
      ++j;
    }
    seen = j;
    recall.push_back(static_cast<double>(tp) / static_cast<double>(positives));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
    i = j;
  }
  // all-points interpolation: precision envelope from the right
  for (std::size_t k = precision.size() - 1; k-- > 0;) {
    precision[k] = std::max(precision[k], precision[k + 1]);
  }
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t k = 0; k < recall.size(); ++k) {
    ap += (recall[k] - prev_recall) * precision[k];
    prev_recall = recall[k];
  }
  return ap;
}

EvaluationResult summarize(const std::vector<std::vector<ScoredItem>>& per_class) {
  EvaluationResult result;
  double sum = 0.0;
  int counted = 0;
  for (const auto& items : per_class) {
    const double ap = average_precision(items);
    result.class_ap.push_back(ap);
    if (!std::isnan(ap)) {
      sum += ap;
      ++counted;
    }
  }
  if (counted == 0) {
    throw InvalidArgument("evaluation set has no positive cells for any class");
  }
  result.mean_ap = sum / counted;
  return result;
}

ad::Matrix predict(DetectorModel& model, const ImageBuffer& image) {
  ad::Tape tape;
  const auto out = model.forward(tape, image);
  ad::Matrix probs = ad::log_softmax(out.logits).value();
  for (auto& v : probs.values) v = std::exp(v);
  return probs;
}

EvaluationResult evaluate(DetectorModel& model, const TargetSet& targets) {
  if (targets.empty()) {
    throw InvalidArgument("cannot evaluate on an empty target set");
  }
  const ModelConfig& cfg = model.config();
  const auto classes = static_cast<std::size_t>(cfg.num_classes);
  std::vector<std::vector<ScoredItem>> per_class(classes);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const ad::Matrix probs = predict(model, targets.image(i));
    std::vector<int> truth(static_cast<std::size_t>(cfg.cells()), cfg.num_classes);
    const Annotations& annotations = targets.evaluation_annotations(i);
    validate_annotations(annotations, cfg.grid_size, cfg.num_classes);
    for (const auto& a : annotations) {
      truth[static_cast<std::size_t>(a.row * cfg.grid_size + a.col)] = a.class_id;
    }
    for (std::size_t cell = 0; cell < truth.size(); ++cell) {
      for (std::size_t k = 0; k < classes; ++k) {
        per_class[k].push_back({probs(cell, k), truth[cell] == static_cast<int>(k)});
      }
    }
  }
  return summarize(per_class);
}

}  // namespace blenda
