#include "maskseg/metrics.hpp"

#include "maskseg/error.hpp"

namespace maskseg {
namespace {

std::optional<double> ratio(std::uint64_t num, std::uint64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

MetricsReport MetricsReport::from_counts(const ConfusionCounts& c) {
  MetricsReport r;
  r.counts = c;
  r.accuracy = ratio(c.tp + c.tn, c.total());
  r.precision = ratio(c.tp, c.tp + c.fp);
  r.recall = ratio(c.tp, c.tp + c.fn);
  r.iou = ratio(c.tp, c.tp + c.fp + c.fn);
  return r;
}

nlohmann::json MetricsReport::to_json() const {
  return {{"accuracy", opt(accuracy)},
          {"precision", opt(precision)},
          {"recall", opt(recall)},
          {"iou", opt(iou)},
          {"masked_pixels", counts.total()},
          {"true_positive", counts.tp},
          {"false_positive", counts.fp},
          {"true_negative", counts.tn},
          {"false_negative", counts.fn}};
}

void accumulate_confusion(ConfusionCounts& counts, std::span<const float> probs, std::span<const std::uint8_t> labels,
                          std::span<const std::uint8_t> mask, double threshold) {
  if (probs.size() != labels.size() || probs.size() != mask.size()) {
    throw ValidationError("evaluate_masked: prediction, label and mask sizes differ");
  }
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (!mask[i]) continue;
    const bool pred = static_cast<double>(probs[i]) >= threshold;
    const bool truth = labels[i] != 0;
    if (pred && truth) ++counts.tp;
    if (pred && !truth) ++counts.fp;
    if (!pred && !truth) ++counts.tn;
    if (!pred && truth) ++counts.fn;
  }
}

MetricsReport evaluate_masked(std::span<const float> probs, std::span<const std::uint8_t> labels,
                              std::span<const std::uint8_t> mask, double threshold) {
  ConfusionCounts c;
  accumulate_confusion(c, probs, labels, mask, threshold);
  return MetricsReport::from_counts(c);
}

}  // namespace maskseg
