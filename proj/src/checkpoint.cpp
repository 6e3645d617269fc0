#include "maskseg/unet.hpp"

#include "container.hpp"

namespace maskseg {
namespace {

constexpr std::string_view kCheckpointMagic = "MKCKPT01";

nlohmann::json config_json(const UNetConfig& cfg, const InputEncoding& enc) {
  return {{"in_channels", cfg.in_channels},
          {"out_channels", cfg.out_channels},
          {"levels", cfg.levels},
          {"base_filters", cfg.base_filters},
          {"mask_mode", std::string(mask_mode_name(enc.mode))},
          {"fill_value", enc.fill_value}};
}

}  // namespace

std::string checkpoint_encode(const ModelParams& params, const InputEncoding& encoding) {
  const auto specs = unet_param_specs(params.config);
  if (params.tensors.size() != specs.size()) throw ValidationError("parameter count does not match config");
  if (encoding.channels() != params.config.in_channels) {
    throw ValidationError("mask_mode " + std::string(mask_mode_name(encoding.mode)) + " needs " +
                          std::to_string(encoding.channels()) + " input channels, model has " +
                          std::to_string(params.config.in_channels));
  }
  nlohmann::json index = nlohmann::json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& t = params.tensors[i]->value;
    if (params.names[i] != specs[i].name || t.shape() != specs[i].shape) {
      throw ValidationError("parameter '" + params.names[i] + "' does not match config layout");
    }
    index.push_back({{"name", specs[i].name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.numel() * sizeof(float);
  }
  std::string out =
      detail::encode_container(kCheckpointMagic, {{"config", config_json(params.config, encoding)}, {"tensors", index}});
  out.reserve(out.size() + offset);
  for (const auto& t : params.tensors) detail::append_le(out, std::span<const float>(t->value.data()));
  return out;
}

Checkpoint checkpoint_decode(std::string_view bytes) {
  const auto c = detail::decode_container(bytes, kCheckpointMagic);
  if (!c.header.contains("config") || !c.header["config"].is_object()) throw FormatError("header is missing 'config'");
  const auto& cj = c.header["config"];
  Checkpoint ck;
  UNetConfig& cfg = ck.params.config;
  cfg.in_channels = detail::header_field<int>(cj, "in_channels");
  cfg.out_channels = detail::header_field<int>(cj, "out_channels");
  cfg.levels = detail::header_field<int>(cj, "levels");
  cfg.base_filters = detail::header_field<int>(cj, "base_filters");
  try {
    cfg.validate();
    ck.encoding.mode = mask_mode_from_name(detail::header_field<std::string>(cj, "mask_mode"));
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
  ck.encoding.fill_value = detail::header_field<float>(cj, "fill_value");

  const auto specs = unet_param_specs(cfg);
  const auto it = c.header.find("tensors");
  if (it == c.header.end() || !it->is_array() || it->size() != specs.size()) {
    throw FormatError("tensor index does not match the configured architecture");
  }
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& e = (*it)[i];
    const auto name = detail::header_field<std::string>(e, "name");
    const auto shape = detail::header_field<Shape>(e, "shape");
    const auto offset = detail::header_field<std::size_t>(e, "offset");
    if (name != specs[i].name || shape != specs[i].shape) {
      throw FormatError("tensor " + std::to_string(i) + " ('" + name + "') does not match the architecture");
    }
    if (offset != expected_offset) throw FormatError("tensor '" + name + "' has an inconsistent offset");
    const std::size_t nbytes = shape_numel(shape) * sizeof(float);
    if (c.payload.size() < offset + nbytes) throw FormatError("truncated payload at tensor '" + name + "'");
    Tensor<float> t(shape);
    detail::read_le(c.payload.substr(offset, nbytes), t.data());
    ck.params.names.push_back(name);
    ck.params.tensors.push_back(parameter(std::move(t)));
    expected_offset = offset + nbytes;
  }
  if (c.payload.size() != expected_offset) throw FormatError("trailing bytes after checkpoint payload");
  if (ck.encoding.channels() != cfg.in_channels) throw FormatError("mask_mode disagrees with in_channels");
  return ck;
}

void checkpoint_write(const ModelParams& params, const InputEncoding& encoding, const std::filesystem::path& path) {
  detail::write_file(path, checkpoint_encode(params, encoding));
}

Checkpoint checkpoint_read(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return checkpoint_decode(bytes);
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

Checkpoint checkpoint_read(const std::filesystem::path& path, const UNetConfig& expected) {
  Checkpoint ck = checkpoint_read(path);
  if (!(ck.params.config == expected)) {
    const auto& g = ck.params.config;
    throw ValidationError("checkpoint config (in=" + std::to_string(g.in_channels) + ", levels=" +
                          std::to_string(g.levels) + ", base=" + std::to_string(g.base_filters) +
                          ") does not match the requested config");
  }
  return ck;
}

}  // namespace maskseg
