#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "maskseg/unet.hpp"

namespace maskseg {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// First/second moments per parameter tensor, zero-initialized.
struct AdamState {
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
  std::int64_t t = 0;

  static AdamState zeros_like(const ModelParams& params);
};

// One Adam update of a single tensor at (already incremented) step t:
//   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
//   theta -= lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
void adam_update(std::span<float> theta, std::span<const float> grad, std::span<float> m, std::span<float> v,
                 std::int64_t t, const AdamConfig& cfg);

// Increments state.t and updates every parameter from its grad buffer.
// Parameters without a gradient are treated as having zero gradient.
void adam_step(ModelParams& params, AdamState& state, const AdamConfig& cfg);

}  // namespace maskseg
