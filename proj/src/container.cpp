#include "container.hpp"

#include <fstream>
#include <iterator>
#include <limits>

namespace maskseg::detail {

void append_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out += static_cast<char>((v >> (8 * i)) & 0xFFu);
}

std::string encode_container(std::string_view magic, const nlohmann::json& header) {
  const std::string text = header.dump();
  if (text.size() > std::numeric_limits<std::uint32_t>::max()) throw FormatError("header too large");
  std::string out(magic);
  append_u32_le(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  return out;
}

Container decode_container(std::string_view bytes, std::string_view magic) {
  if (bytes.size() < magic.size() || bytes.substr(0, magic.size()) != magic) {
    const auto got = bytes.substr(0, std::min(bytes.size(), magic.size()));
    throw FormatError("bad magic: expected '" + std::string(magic) + "', got '" + std::string(got) + "'");
  }
  if (bytes.size() < magic.size() + 4) throw FormatError("truncated header length");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) {
    len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[magic.size() + i])) << (8 * i);
  }
  const std::size_t body = magic.size() + 4;
  if (bytes.size() - body < len) throw FormatError("truncated JSON header");
  Container c;
  try {
    c.header = nlohmann::json::parse(bytes.substr(body, len));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed JSON header: ") + e.what());
  }
  if (!c.header.is_object()) throw FormatError("JSON header is not an object");
  c.payload = bytes.substr(body + len);
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return data;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace maskseg::detail
