#include "maskseg/adam.hpp"

#include <cmath>

namespace maskseg {

void AdamConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("beta1 and beta2 must be in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState s;
  for (const auto& t : params.tensors) {
    s.m.emplace_back(t->value.numel(), 0.0f);
    s.v.emplace_back(t->value.numel(), 0.0f);
  }
  return s;
}

void adam_update(std::span<float> theta, std::span<const float> grad, std::span<float> m, std::span<float> v,
                 std::int64_t t, const AdamConfig& cfg) {
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw ValidationError("adam_update: shape mismatch");
  }
  if (t < 1) throw ValidationError("adam_update: step counter must be >= 1");
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i];
    const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
    const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    const double step = cfg.learning_rate * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon);
    theta[i] = static_cast<float>(theta[i] - step);
  }
}

void adam_step(ModelParams& params, AdamState& state, const AdamConfig& cfg) {
  cfg.validate();
  if (state.m.size() != params.tensors.size()) throw ValidationError("adam_step: state does not match parameters");
  ++state.t;
  std::vector<float> zeros;
  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    auto& node = *params.tensors[k];
    std::span<const float> g = node.grad.data();
    if (node.grad.empty()) {
      zeros.assign(node.value.numel(), 0.0f);
      g = zeros;
    }
    adam_update(node.value.data(), g, state.m[k], state.v[k], state.t, cfg);
  }
}

}  // namespace maskseg
