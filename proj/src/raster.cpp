#include "maskseg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "container.hpp"
#include "maskseg/error.hpp"

namespace maskseg {
namespace {

constexpr std::string_view kRasterMagic = "RRASTER1";

}  // namespace

void GridTransform::validate() const {
  if (!(std::isfinite(origin_x) && std::isfinite(origin_y))) throw ValidationError("grid origin must be finite");
  if (!(std::isfinite(pixel_size) && pixel_size > 0.0)) throw ValidationError("grid pixel_size must be > 0");
  if (width < 1 || height < 1) throw ValidationError("grid width and height must be >= 1");
}

GridTransform GridTransform::from_affine(const std::array<double, 6>& gt, std::int64_t width,
                                         std::int64_t height) {
  if (gt[2] != 0.0 || gt[4] != 0.0) throw ValidationError("rotated or sheared grids are not supported");
  if (!(gt[1] > 0.0) || gt[5] != -gt[1]) {
    throw ValidationError("grid must be north-up with square pixels (dy == -dx, dx > 0)");
  }
  GridTransform g{gt[0], gt[3], gt[1], width, height};
  g.validate();
  return g;
}

nlohmann::json grid_to_json(const GridTransform& grid) {
  return {{"origin_x", grid.origin_x},
          {"origin_y", grid.origin_y},
          {"pixel_size", grid.pixel_size},
          {"width", grid.width},
          {"height", grid.height}};
}

GridTransform grid_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FormatError("grid must be a JSON object");
  GridTransform g;
  g.origin_x = detail::header_field<double>(j, "origin_x");
  g.origin_y = detail::header_field<double>(j, "origin_y");
  g.pixel_size = detail::header_field<double>(j, "pixel_size");
  g.width = detail::header_field<std::int64_t>(j, "width");
  g.height = detail::header_field<std::int64_t>(j, "height");
  try {
    g.validate();
  } catch (const ValidationError& e) {
    throw FormatError(e.what());
  }
  return g;
}

GridTransform read_grid_json(const std::filesystem::path& path) {
  const std::string text = detail::read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed grid JSON '" + path.string() + "': " + e.what(), e.byte);
  }
  return grid_from_json(j);
}

Point2 pixel_center(const GridTransform& grid, std::int64_t row, std::int64_t col) {
  if (row < 0 || row >= grid.height || col < 0 || col >= grid.width) {
    throw BoundsError("pixel (" + std::to_string(row) + ", " + std::to_string(col) +
                      ") outside " + std::to_string(grid.height) + "x" + std::to_string(grid.width) + " grid");
  }
  return {grid.origin_x + (static_cast<double>(col) + 0.5) * grid.pixel_size,
          grid.origin_y - (static_cast<double>(row) + 0.5) * grid.pixel_size};
}

std::optional<PixelIndex> world_to_pixel(const GridTransform& grid, Point2 p) {
  const double c = std::floor((p.x - grid.origin_x) / grid.pixel_size);
  const double r = std::floor((grid.origin_y - p.y) / grid.pixel_size);
  if (!(c >= 0.0 && r >= 0.0 && c < static_cast<double>(grid.width) &&
        r < static_cast<double>(grid.height))) {
    return std::nullopt;
  }
  return PixelIndex{static_cast<std::int64_t>(r), static_cast<std::int64_t>(c)};
}

std::string_view dtype_name(DType d) { return d == DType::u8 ? "u8" : "f32"; }

Raster::Raster(const GridTransform& grid, int bands, DType dtype)
    : grid_(grid), bands_(bands), dtype_(dtype) {
  grid_.validate();
  if (bands < 1) throw ValidationError("raster needs at least one band");
  const std::size_t n = static_cast<std::size_t>(bands) * grid_.pixel_count();
  if (dtype == DType::u8) {
    data_ = std::vector<std::uint8_t>(n, 0);
  } else {
    data_ = std::vector<float>(n, 0.0f);
  }
}

std::size_t Raster::sample_count() const noexcept {
  return std::visit([](const auto& v) { return v.size(); }, data_);
}

std::span<std::uint8_t> Raster::u8() {
  if (dtype_ != DType::u8) throw ValidationError("raster dtype is f32, expected u8");
  return std::get<std::vector<std::uint8_t>>(data_);
}

std::span<const std::uint8_t> Raster::u8() const {
  if (dtype_ != DType::u8) throw ValidationError("raster dtype is f32, expected u8");
  return std::get<std::vector<std::uint8_t>>(data_);
}

std::span<float> Raster::f32() {
  if (dtype_ != DType::f32) throw ValidationError("raster dtype is u8, expected f32");
  return std::get<std::vector<float>>(data_);
}

std::span<const float> Raster::f32() const {
  if (dtype_ != DType::f32) throw ValidationError("raster dtype is u8, expected f32");
  return std::get<std::vector<float>>(data_);
}

double Raster::value(int band, std::int64_t row, std::int64_t col) const {
  const std::size_t i = index(band, row, col);
  return dtype_ == DType::u8 ? static_cast<double>(u8()[i]) : static_cast<double>(f32()[i]);
}

bool Raster::is_binary() const {
  if (dtype_ != DType::u8 || bands_ != 1) return false;
  const auto d = u8();
  return std::all_of(d.begin(), d.end(), [](std::uint8_t v) { return v <= 1; });
}

bool operator==(const Raster& a, const Raster& b) {
  if (!(a.grid_ == b.grid_) || a.bands_ != b.bands_ || a.dtype_ != b.dtype_) return false;
  if (a.dtype_ == DType::u8) return std::ranges::equal(a.u8(), b.u8());
  // Bitwise comparison so NaN payloads and signed zeros count.
  const auto fa = a.f32();
  const auto fb = b.f32();
  return fa.size() == fb.size() &&
         (fa.empty() || std::memcmp(fa.data(), fb.data(), fa.size_bytes()) == 0);
}

void require_same_grid(const GridTransform& a, const GridTransform& b, const char* what) {
  if (!(a == b)) throw ValidationError(std::string(what) + ": rasters are not on the same grid");
}

void require_binary(const Raster& r, const char* what) {
  if (!r.is_binary()) throw ValidationError(std::string(what) + " must be a single-band u8 raster with values in {0,1}");
}

std::string rras_encode(const Raster& raster) {
  nlohmann::json header = grid_to_json(raster.grid());
  header["bands"] = raster.bands();
  header["dtype"] = std::string(dtype_name(raster.dtype()));
  std::string out = detail::encode_container(kRasterMagic, header);
  if (raster.dtype() == DType::u8) {
    detail::append_le(out, raster.u8());
  } else {
    detail::append_le(out, raster.f32());
  }
  return out;
}

Raster rras_decode(std::string_view bytes) {
  const auto c = detail::decode_container(bytes, kRasterMagic);
  const GridTransform grid = grid_from_json(c.header);
  const int bands = detail::header_field<int>(c.header, "bands");
  if (bands < 1) throw FormatError("bands must be >= 1");
  const auto dtype_text = detail::header_field<std::string>(c.header, "dtype");
  DType dtype;
  if (dtype_text == "u8") {
    dtype = DType::u8;
  } else if (dtype_text == "f32") {
    dtype = DType::f32;
  } else {
    throw FormatError("unknown dtype '" + dtype_text + "'");
  }
  Raster r(grid, bands, dtype);
  const std::size_t expected = r.sample_count() * (dtype == DType::u8 ? 1 : 4);
  if (c.payload.size() < expected) {
    throw FormatError("truncated sample data: expected " + std::to_string(expected) + " bytes, got " +
                      std::to_string(c.payload.size()));
  }
  if (c.payload.size() > expected) throw FormatError("trailing bytes after sample data");
  if (dtype == DType::u8) {
    detail::read_le(c.payload, r.u8());
  } else {
    detail::read_le(c.payload, r.f32());
  }
  return r;
}

void rras_write(const Raster& raster, const std::filesystem::path& path) {
  detail::write_file(path, rras_encode(raster));
}

Raster rras_read(const std::filesystem::path& path) {
  const std::string bytes = detail::read_file(path);
  try {
    return rras_decode(bytes);
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  }
}

std::string encode_preview(const Raster& raster, std::span<const int> bands, PreviewOptions options) {
  if (bands.size() != 1 && bands.size() != 3) throw ValidationError("preview needs 1 or 3 bands");
  for (const int b : bands) {
    if (b < 0 || b >= raster.bands()) {
      throw BoundsError("band " + std::to_string(b) + " out of range for " +
                        std::to_string(raster.bands()) + "-band raster");
    }
  }
  const std::size_t npix = raster.grid().pixel_count();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  if (raster.dtype() == DType::f32) {
    const auto d = raster.f32();
    for (const int b : bands) {
      for (std::size_t i = 0; i < npix; ++i) {
        const double v = d[static_cast<std::size_t>(b) * npix + i];
        if (std::isfinite(v)) {
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      }
    }
  }
  auto to_byte = [&](int band, std::size_t i) -> char {
    const std::size_t k = static_cast<std::size_t>(band) * npix + i;
    if (raster.dtype() == DType::u8) {
      return static_cast<char>(std::min(255, static_cast<int>(raster.u8()[k]) * options.u8_scale));
    }
    const double v = raster.f32()[k];
    if (!(hi > lo) || !std::isfinite(v)) return 0;
    return static_cast<char>(static_cast<int>(std::lround((v - lo) / (hi - lo) * 255.0)));
  };
  std::string out = (bands.size() == 1 ? "P5\n" : "P6\n") + std::to_string(raster.width()) + " " +
                    std::to_string(raster.height()) + "\n255\n";
  out.reserve(out.size() + npix * bands.size());
  for (std::size_t i = 0; i < npix; ++i) {
    for (const int b : bands) out += to_byte(b, i);
  }
  return out;
}

void export_preview(const Raster& raster, const std::filesystem::path& path,
                    std::span<const int> bands, PreviewOptions options) {
  detail::write_file(path, encode_preview(raster, bands, options));
}

}  // namespace maskseg
