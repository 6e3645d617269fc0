#include "maskseg/train.hpp"

#include <cmath>
#include <set>

#include "container.hpp"
#include "maskseg/ops.hpp"
#include "maskseg/rng.hpp"

namespace maskseg {
namespace {

std::vector<const Patch*> gather(const PatchArchive& archive, const std::vector<std::size_t>& idx, std::size_t begin,
                                 std::size_t end) {
  std::vector<const Patch*> out;
  for (std::size_t i = begin; i < end; ++i) out.push_back(&archive.patches[idx[i]]);
  return out;
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

ConfusionCounts split_counts(const ModelParams& params, const InputEncoding& enc, const PatchArchive& archive,
                             const std::vector<std::size_t>& idx, double threshold, int batch_size) {
  ConfusionCounts counts;
  const auto bs = static_cast<std::size_t>(std::max(batch_size, 1));
  for (std::size_t start = 0; start < idx.size(); start += bs) {
    const auto batch = make_batch(gather(archive, idx, start, std::min(idx.size(), start + bs)), enc);
    const auto logits = unet_forward(params, constant(batch.input));
    const auto probs = coat_output(sigmoid_values(logits->value), batch.mask);
    std::size_t off = 0;
    for (std::size_t k = start; k < std::min(idx.size(), start + bs); ++k) {
      const Patch& p = archive.patches[idx[k]];
      const std::size_t plane = p.mask.size();
      accumulate_confusion(counts, std::span<const float>(probs.ptr() + off, plane), p.label, p.mask, threshold);
      off += plane;
    }
  }
  return counts;
}

}  // namespace

void TrainConfig::validate() const {
  adam().validate();
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  unet().validate();
  if (mask_mode.mode == MaskMode::fixed_fill && !std::isfinite(mask_mode.fill_value)) {
    throw ValidationError("fill_value must be finite");
  }
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"learning_rate", "beta1",      "beta2",      "epsilon", "batch_size",
                                           "epochs",        "seed",       "mask_mode",  "fill_value",
                                           "checkpoint",    "levels",     "base_filters"};
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown train config key '" + key + "'");
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    const auto it = j.find(key);
    if (it == j.end()) return;
    try {
      field = it->get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(std::string("train config key '") + key + "' has the wrong type");
    }
  };
  get("learning_rate", c.learning_rate);
  get("beta1", c.beta1);
  get("beta2", c.beta2);
  get("epsilon", c.epsilon);
  get("batch_size", c.batch_size);
  get("epochs", c.epochs);
  get("seed", c.seed);
  get("checkpoint", c.checkpoint);
  get("levels", c.levels);
  get("base_filters", c.base_filters);
  std::string mode = "channel";
  get("mask_mode", mode);
  c.mask_mode.mode = mask_mode_from_name(mode);
  get("fill_value", c.mask_mode.fill_value);
  c.validate();
  return c;
}

TrainConfig TrainConfig::read(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed train config '" + path.string() + "': " + e.what(), e.byte);
  }
  return from_json(j);
}

nlohmann::json TrainConfig::to_json() const {
  return {{"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"epsilon", epsilon},
          {"batch_size", batch_size},
          {"epochs", epochs},
          {"seed", seed},
          {"mask_mode", std::string(mask_mode_name(mask_mode.mode))},
          {"fill_value", mask_mode.fill_value},
          {"checkpoint", checkpoint},
          {"levels", levels},
          {"base_filters", base_filters}};
}

Batch make_batch(const std::vector<const Patch*>& patches, const InputEncoding& enc) {
  if (patches.empty()) throw ValidationError("empty batch");
  const auto s = static_cast<std::size_t>(patches.front()->size);
  const std::size_t plane = s * s;
  const auto b = patches.size();
  const auto c = static_cast<std::size_t>(enc.channels());
  Batch batch{Tensor<float>({b, c, s, s}), Tensor<float>({b, 1, s, s}), Tensor<float>({b, 1, s, s})};
  for (std::size_t k = 0; k < b; ++k) {
    const Patch& p = *patches[k];
    if (static_cast<std::size_t>(p.size) != s) throw ValidationError("patches in a batch differ in size");
    encode_input(p.image.data(), p.mask.data(), plane, enc, batch.input.ptr() + k * c * plane);
    for (std::size_t i = 0; i < plane; ++i) {
      batch.labels[k * plane + i] = static_cast<float>(p.label[i]);
      batch.mask[k * plane + i] = static_cast<float>(p.mask[i]);
    }
  }
  return batch;
}

std::vector<std::size_t> epoch_order(std::vector<std::size_t> indices, std::uint64_t seed, int epoch) {
  SplitMix64 rng(seed ^ (0xD1B54A32D192ED03ULL * static_cast<std::uint64_t>(epoch)));
  for (std::size_t i = indices.size(); i-- > 1;) {
    const auto j = static_cast<std::size_t>(rng.next() % (static_cast<std::uint64_t>(i) + 1));
    std::swap(indices[i], indices[j]);
  }
  return indices;
}

TrainResult train(const TrainConfig& config, const PatchArchive& archive,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  const UNetConfig ucfg = config.unet();
  const auto train_idx = archive.assignment.indices(Split::train);
  const auto val_idx = archive.assignment.indices(Split::val);
  if (train_idx.empty()) throw ValidationError("archive has no training patches");
  if (archive.spec.size % ucfg.size_multiple() != 0) {
    throw ValidationError("patch size " + std::to_string(archive.spec.size) + " is not divisible by 2^levels = " +
                          std::to_string(ucfg.size_multiple()));
  }

  ModelParams params = init_params(ucfg, config.seed);
  AdamState state = AdamState::zeros_like(params);
  const AdamConfig adam = config.adam();
  const auto bs = static_cast<std::size_t>(config.batch_size);

  TrainResult result;
  result.encoding = config.mask_mode;
  std::optional<double> best_acc;
  bool have_best = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = epoch_order(train_idx, config.seed, epoch);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto batch = make_batch(gather(archive, order, start, std::min(order.size(), start + bs)),
                                    config.mask_mode);
      zero_grad(params.tensors);
      const auto logits = unet_forward(params, constant(batch.input));
      const auto loss = masked_bce_with_logits(logits, batch.labels, batch.mask);
      backward(loss);
      adam_step(params, state, adam);
      loss_sum += static_cast<double>(loss->value[0]);
      ++batches;
    }
    zero_grad(params.tensors);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    if (!val_idx.empty()) {
      const auto m = MetricsReport::from_counts(
          split_counts(params, config.mask_mode, archive, val_idx, 0.5, config.batch_size));
      rec.val_accuracy = m.accuracy;
      rec.val_iou = m.iou;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    // Strictly better accuracy wins, so ties keep the earlier epoch. Without
    // any validation signal the latest epoch is kept.
    bool take = !have_best;
    if (rec.val_accuracy) {
      take = take || !best_acc || *rec.val_accuracy > *best_acc;
    } else {
      take = take || !best_acc;
    }
    if (take) {
      have_best = true;
      best_acc = rec.val_accuracy;
      result.params = params.clone();
      result.best_epoch = epoch;
    }
  }
  return result;
}

MetricsReport evaluate_split(const ModelParams& params, const InputEncoding& enc, const PatchArchive& archive,
                             Split split, double threshold, int batch_size) {
  return MetricsReport::from_counts(
      split_counts(params, enc, archive, archive.assignment.indices(split), threshold, batch_size));
}

MetricsReport evaluate_split_all_zero(const PatchArchive& archive, Split split) {
  ConfusionCounts counts;
  for (const auto i : archive.assignment.indices(split)) {
    const Patch& p = archive.patches[i];
    const std::vector<float> zeros(p.mask.size(), 0.0f);
    accumulate_confusion(counts, zeros, p.label, p.mask, 0.5);
  }
  return MetricsReport::from_counts(counts);
}

std::string history_jsonl(const std::vector<EpochRecord>& history) {
  std::string out;
  for (const auto& r : history) {
    out += nlohmann::json{{"epoch", r.epoch},
                          {"train_loss", r.train_loss},
                          {"val_accuracy", opt(r.val_accuracy)},
                          {"val_iou", opt(r.val_iou)}}
               .dump();
    out += '\n';
  }
  return out;
}

}  // namespace maskseg
