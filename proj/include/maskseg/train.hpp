#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "maskseg/adam.hpp"
#include "maskseg/metrics.hpp"
#include "maskseg/patches.hpp"
#include "maskseg/unet.hpp"

namespace maskseg {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 4;
  int epochs = 20;
  std::uint64_t seed = 0;
  InputEncoding mask_mode;
  std::string checkpoint;  // optional output path
  int levels = 4;
  int base_filters = 32;

  void validate() const;
  AdamConfig adam() const { return {learning_rate, beta1, beta2, epsilon}; }
  UNetConfig unet() const { return {mask_mode.channels(), 1, levels, base_filters}; }

  // Unknown keys are rejected. mask_mode is "channel", "premultiply" or
  // "fixed_fill" (with "fill_value").
  static TrainConfig from_json(const nlohmann::json& j);
  static TrainConfig read(const std::filesystem::path& path);
  nlohmann::json to_json() const;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  std::optional<double> val_accuracy;
  std::optional<double> val_iou;
};

struct TrainResult {
  ModelParams params;  // best epoch by validation masked accuracy
  InputEncoding encoding;
  std::vector<EpochRecord> history;
  int best_epoch = 0;
};

// Stacks a batch of patches into model input [B, C, S, S] plus label and
// mask tensors [B, 1, S, S].
struct Batch {
  Tensor<float> input;
  Tensor<float> labels;
  Tensor<float> mask;
};
Batch make_batch(const std::vector<const Patch*>& patches, const InputEncoding& enc);

// Index order for one epoch: Fisher-Yates over splitmix64 seeded from
// (seed, epoch).
std::vector<std::size_t> epoch_order(std::vector<std::size_t> indices, std::uint64_t seed, int epoch);

// Single-threaded and deterministic: identical inputs give bit-identical
// parameters and history.
TrainResult train(const TrainConfig& config, const PatchArchive& archive,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Masked metrics of the model's coated probabilities over one split.
MetricsReport evaluate_split(const ModelParams& params, const InputEncoding& enc, const PatchArchive& archive,
                             Split split, double threshold = 0.5, int batch_size = 4);

// Masked metrics of the predictor that always answers 0, over one split.
MetricsReport evaluate_split_all_zero(const PatchArchive& archive, Split split);

// One JSON object per line: epoch, train_loss, val_accuracy, val_iou.
std::string history_jsonl(const std::vector<EpochRecord>& history);

}  // namespace maskseg
