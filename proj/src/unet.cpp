#include "maskseg/unet.hpp"

#include <cmath>
#include <cstring>
#include <numbers>

#include "maskseg/ops.hpp"
#include "maskseg/rng.hpp"

namespace maskseg {
namespace {

std::string level_name(const char* prefix, int i) { return prefix + std::to_string(i); }

void add_conv(std::vector<ParamSpec>& out, const std::string& name, std::size_t in, std::size_t outc,
              std::size_t k) {
  out.push_back({name + ".weight", {outc, in, k, k}});
  out.push_back({name + ".bias", {outc}});
}

// Draws N(0,1) pairs by Box-Muller and hands them out one at a time.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : rng_(seed) {}

  double next() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    const double u1 = 1.0 - rng_.uniform();  // (0, 1]
    const double u2 = rng_.uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    cached_ = true;
    return r * std::cos(theta);
  }

 private:
  SplitMix64 rng_;
  double spare_ = 0.0;
  bool cached_ = false;
};

template <typename T>
struct Forward {
  const ModelParamsT<T>& p;

  Var<T> conv(const Var<T>& x, const std::string& name) const {
    return conv2d(x, p.at(name + ".weight"), p.at(name + ".bias"));
  }
  Var<T> conv_relu(const Var<T>& x, const std::string& name) const { return relu(conv(x, name)); }
};

}  // namespace

std::string_view mask_mode_name(MaskMode m) {
  switch (m) {
    case MaskMode::channel:
      return "channel";
    case MaskMode::premultiply:
      return "premultiply";
    case MaskMode::fixed_fill:
      return "fixed_fill";
  }
  return "channel";
}

MaskMode mask_mode_from_name(std::string_view name) {
  if (name == "channel") return MaskMode::channel;
  if (name == "premultiply") return MaskMode::premultiply;
  if (name == "fixed_fill") return MaskMode::fixed_fill;
  throw ValidationError("unknown mask_mode '" + std::string(name) + "' (channel, premultiply, fixed_fill)");
}

template <typename T>
void encode_input(const float* rgb, const std::uint8_t* mask, std::size_t plane, const InputEncoding& enc, T* out) {
  for (std::size_t c = 0; c < 3; ++c) {
    const float* src = rgb + c * plane;
    T* dst = out + c * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      switch (enc.mode) {
        case MaskMode::channel:
          dst[i] = static_cast<T>(src[i]);
          break;
        case MaskMode::premultiply:
          dst[i] = mask[i] ? static_cast<T>(src[i]) : T(0);
          break;
        case MaskMode::fixed_fill:
          dst[i] = mask[i] ? static_cast<T>(src[i]) : static_cast<T>(enc.fill_value);
          break;
      }
    }
  }
  if (enc.mode == MaskMode::channel) {
    T* dst = out + 3 * plane;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = static_cast<T>(mask[i]);
  }
}

template void encode_input<float>(const float*, const std::uint8_t*, std::size_t, const InputEncoding&, float*);
template void encode_input<double>(const float*, const std::uint8_t*, std::size_t, const InputEncoding&, double*);

void UNetConfig::validate() const {
  if (in_channels < 1 || out_channels < 1) throw ValidationError("UNet channel counts must be >= 1");
  if (levels < 1 || levels > 12) throw ValidationError("UNet levels must be in [1, 12]");
  if (base_filters < 1) throw ValidationError("UNet base_filters must be >= 1");
}

std::vector<ParamSpec> unet_param_specs(const UNetConfig& cfg) {
  cfg.validate();
  std::vector<ParamSpec> out;
  const auto width = [&](int i) { return static_cast<std::size_t>(cfg.base_filters) << i; };
  std::size_t in = static_cast<std::size_t>(cfg.in_channels);
  for (int i = 0; i < cfg.levels; ++i) {
    add_conv(out, level_name("enc", i) + ".conv1", in, width(i), 3);
    add_conv(out, level_name("enc", i) + ".conv2", width(i), width(i), 3);
    in = width(i);
  }
  add_conv(out, "bottleneck.conv1", in, width(cfg.levels), 3);
  add_conv(out, "bottleneck.conv2", width(cfg.levels), width(cfg.levels), 3);
  for (int i = cfg.levels - 1; i >= 0; --i) {
    add_conv(out, level_name("dec", i) + ".up", width(i + 1), width(i), 3);
    add_conv(out, level_name("dec", i) + ".conv1", 2 * width(i), width(i), 3);
    add_conv(out, level_name("dec", i) + ".conv2", width(i), width(i), 3);
  }
  add_conv(out, "head", width(0), static_cast<std::size_t>(cfg.out_channels), 1);
  return out;
}

template <typename T>
const Var<T>& ModelParamsT<T>::at(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return tensors[i];
  }
  throw ValidationError("no parameter named '" + std::string(name) + "'");
}

template <typename T>
std::size_t ModelParamsT<T>::value_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t->value.numel();
  return n;
}

template <typename T>
bool ModelParamsT<T>::same_values(const ModelParamsT& other) const {
  if (!(config == other.config) || names != other.names || tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto& a = tensors[i]->value;
    const auto& b = other.tensors[i]->value;
    if (a.shape() != b.shape()) return false;
    if (a.numel() && std::memcmp(a.ptr(), b.ptr(), a.numel() * sizeof(T)) != 0) return false;
  }
  return true;
}

template struct ModelParamsT<float>;
template struct ModelParamsT<double>;

ModelParams init_params(const UNetConfig& cfg, std::uint64_t seed) {
  ModelParams params;
  params.config = cfg;
  NormalStream normal(seed);
  for (const auto& spec : unet_param_specs(cfg)) {
    Tensor<float> t(spec.shape);
    if (spec.shape.size() == 4) {
      const double fan_in = static_cast<double>(spec.shape[1] * spec.shape[2] * spec.shape[3]);
      const double stddev = std::sqrt(2.0 / fan_in);
      for (auto& v : t.data()) v = static_cast<float>(normal.next() * stddev);
    }
    params.names.push_back(spec.name);
    params.tensors.push_back(parameter(std::move(t)));
  }
  return params;
}

template <typename T>
Var<T> unet_forward(const ModelParamsT<T>& params, const Var<T>& x) {
  const UNetConfig& cfg = params.config;
  cfg.validate();
  const Shape& s = x->value.shape();
  if (s.size() != 4 || s[1] != static_cast<std::size_t>(cfg.in_channels)) {
    throw ValidationError("unet_forward: expected input [N," + std::to_string(cfg.in_channels) + ",H,W], got " +
                          shape_str(s));
  }
  const auto m = static_cast<std::size_t>(cfg.size_multiple());
  if (s[2] % m || s[3] % m || s[2] == 0 || s[3] == 0) {
    throw ValidationError("unet_forward: H and W must be positive multiples of " + std::to_string(m) + ", got " +
                          shape_str(s));
  }
  const Forward<T> f{params};
  std::vector<Var<T>> skips;
  Var<T> h = x;
  for (int i = 0; i < cfg.levels; ++i) {
    const std::string name = level_name("enc", i);
    h = f.conv_relu(h, name + ".conv1");
    h = f.conv_relu(h, name + ".conv2");
    skips.push_back(h);
    h = maxpool2(h);
  }
  h = f.conv_relu(h, "bottleneck.conv1");
  h = f.conv_relu(h, "bottleneck.conv2");
  for (int i = cfg.levels - 1; i >= 0; --i) {
    const std::string name = level_name("dec", i);
    h = f.conv_relu(upsample2(h), name + ".up");
    h = concat_channels(skips[static_cast<std::size_t>(i)], h);
    h = f.conv_relu(h, name + ".conv1");
    h = f.conv_relu(h, name + ".conv2");
  }
  return f.conv(h, "head");
}

template Var<float> unet_forward<float>(const ModelParamsT<float>&, const Var<float>&);
template Var<double> unet_forward<double>(const ModelParamsT<double>&, const Var<double>&);

}  // namespace maskseg
