#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include <json.hpp>

namespace maskseg {

// Confusion counts over mask-1 pixels only.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
  }
};

// Ratios with a zero denominator are absent rather than 0.
struct MetricsReport {
  std::optional<double> accuracy;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> iou;
  ConfusionCounts counts;

  static MetricsReport from_counts(const ConfusionCounts& c);
  nlohmann::json to_json() const;
};

// Prediction is positive iff prob >= threshold. Only mask != 0 pixels count.
void accumulate_confusion(ConfusionCounts& counts, std::span<const float> probs, std::span<const std::uint8_t> labels,
                          std::span<const std::uint8_t> mask, double threshold = 0.5);

MetricsReport evaluate_masked(std::span<const float> probs, std::span<const std::uint8_t> labels,
                              std::span<const std::uint8_t> mask, double threshold = 0.5);

}  // namespace maskseg
