#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "maskseg/autodiff.hpp"

namespace maskseg {

// How the validity mask reaches the model input.
//   channel:     [R, G, B, mask]
//   premultiply: [R*mask, G*mask, B*mask]
//   fixed_fill:  RGB with mask-0 pixels replaced by fill_value
enum class MaskMode : std::uint8_t { channel, premultiply, fixed_fill };

struct InputEncoding {
  MaskMode mode = MaskMode::channel;
  float fill_value = 0.0f;

  int channels() const noexcept { return mode == MaskMode::channel ? 4 : 3; }
  friend bool operator==(const InputEncoding&, const InputEncoding&) = default;
};

std::string_view mask_mode_name(MaskMode m);
MaskMode mask_mode_from_name(std::string_view name);

// Encodes one sample: rgb holds three planes of `plane` floats, mask one plane
// of {0,1}; out receives channels() planes.
template <typename T>
void encode_input(const float* rgb, const std::uint8_t* mask, std::size_t plane, const InputEncoding& enc,
                  T* out);

struct UNetConfig {
  int in_channels = 4;
  int out_channels = 1;
  int levels = 4;
  int base_filters = 32;

  void validate() const;
  // Inputs must have H and W divisible by this.
  std::int64_t size_multiple() const { return std::int64_t{1} << levels; }
  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

struct ParamSpec {
  std::string name;
  Shape shape;
};

// Canonical parameter order: enc0..enc{L-1}, bottleneck, dec{L-1}..dec0, head.
std::vector<ParamSpec> unet_param_specs(const UNetConfig& cfg);

template <typename T>
struct ModelParamsT {
  UNetConfig config;
  std::vector<std::string> names;
  std::vector<Var<T>> tensors;

  const Var<T>& at(std::string_view name) const;
  std::size_t value_count() const;

  // Independent copy with fresh leaf nodes.
  template <typename U>
  ModelParamsT<U> cast() const {
    ModelParamsT<U> out;
    out.config = config;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(parameter(t->value.template cast<U>()));
    return out;
  }
  ModelParamsT clone() const { return cast<T>(); }

  // Values equal bit for bit.
  bool same_values(const ModelParamsT& other) const;
};

using ModelParams = ModelParamsT<float>;

// He-normal weights (std sqrt(2 / fan_in)) from Box-Muller over splitmix64
// uniforms in canonical order; biases zero.
ModelParams init_params(const UNetConfig& cfg, std::uint64_t seed);

// Logits [N, out_channels, H, W] for input [N, in_channels, H, W].
template <typename T>
Var<T> unet_forward(const ModelParamsT<T>& params, const Var<T>& x);

struct Checkpoint {
  InputEncoding encoding;
  ModelParams params;
};

// MKCKPT01 container: JSON {config, tensors: [{name, shape, offset}]} then
// f32 LE payload; offsets are byte offsets into the payload.
std::string checkpoint_encode(const ModelParams& params, const InputEncoding& encoding);
Checkpoint checkpoint_decode(std::string_view bytes);
void checkpoint_write(const ModelParams& params, const InputEncoding& encoding, const std::filesystem::path& path);
Checkpoint checkpoint_read(const std::filesystem::path& path);
// Fails with ValidationError when the stored config differs from `expected`.
Checkpoint checkpoint_read(const std::filesystem::path& path, const UNetConfig& expected);

}  // namespace maskseg
