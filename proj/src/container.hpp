#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include <json.hpp>

#include "maskseg/error.hpp"

namespace maskseg::detail {

// Shared layout of the RRASTER1 / MKPATCH1 / MKCKPT01 files: 8-byte magic,
// u32 LE header length, JSON header, binary payload.
std::string encode_container(std::string_view magic, const nlohmann::json& header);

struct Container {
  nlohmann::json header;
  std::string_view payload;
};

Container decode_container(std::string_view bytes, std::string_view magic);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

void append_u32_le(std::string& out, std::uint32_t v);

template <typename T>
void append_le(std::string& out, std::span<const T> values) {
  static_assert(std::is_arithmetic_v<T>);
  const std::size_t start = out.size();
  out.resize(start + values.size_bytes());
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    if (!values.empty()) std::memcpy(out.data() + start, values.data(), values.size_bytes());
  } else {
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(values[i]);
      for (std::size_t b = 0; b < sizeof(T); ++b) out[start + i * sizeof(T) + b] = bytes[sizeof(T) - 1 - b];
    }
  }
}

template <typename T>
void read_le(std::string_view bytes, std::span<T> out) {
  static_assert(std::is_arithmetic_v<T>);
  if (bytes.size() != out.size_bytes()) throw FormatError("payload size mismatch");
  if constexpr (std::endian::native == std::endian::little || sizeof(T) == 1) {
    if (!out.empty()) std::memcpy(out.data(), bytes.data(), bytes.size());
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::array<char, sizeof(T)> b{};
      for (std::size_t k = 0; k < sizeof(T); ++k) b[k] = bytes[i * sizeof(T) + sizeof(T) - 1 - k];
      out[i] = std::bit_cast<T>(b);
    }
  }
}

// Typed header field access; missing or mistyped keys raise FormatError.
template <typename T>
T header_field(const nlohmann::json& header, const char* key) {
  const auto it = header.find(key);
  if (it == header.end()) throw FormatError(std::string("header is missing '") + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FormatError(std::string("header field '") + key + "' has the wrong type");
  }
}

}  // namespace maskseg::detail
