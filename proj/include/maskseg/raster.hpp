#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "maskseg/geodata.hpp"

namespace maskseg {

// North-up pixel grid. Row 0 is the top edge; y decreases as row increases.
struct GridTransform {
  double origin_x = 0.0;  // left edge, meters
  double origin_y = 0.0;  // top edge, meters
  double pixel_size = 0.2;
  std::int64_t width = 1;
  std::int64_t height = 1;

  void validate() const;
  std::size_t pixel_count() const { return static_cast<std::size_t>(width * height); }

  // GDAL-style (x0, dx, rx, y0, ry, dy); rotation/shear and non-square pixels
  // are rejected.
  static GridTransform from_affine(const std::array<double, 6>& gt, std::int64_t width,
                                   std::int64_t height);

  friend bool operator==(const GridTransform&, const GridTransform&) = default;
};

nlohmann::json grid_to_json(const GridTransform& grid);
GridTransform grid_from_json(const nlohmann::json& j);
GridTransform read_grid_json(const std::filesystem::path& path);

struct PixelIndex {
  std::int64_t row = 0;
  std::int64_t col = 0;

  friend bool operator==(const PixelIndex&, const PixelIndex&) = default;
};

Point2 pixel_center(const GridTransform& grid, std::int64_t row, std::int64_t col);

// floor-based lookup with left/top-inclusive edges; nullopt when outside.
std::optional<PixelIndex> world_to_pixel(const GridTransform& grid, Point2 p);

enum class DType : std::uint8_t { u8, f32 };

std::string_view dtype_name(DType d);

// Band-sequential, row-major samples on a grid.
class Raster {
 public:
  Raster() = default;
  Raster(const GridTransform& grid, int bands, DType dtype);

  const GridTransform& grid() const noexcept { return grid_; }
  int bands() const noexcept { return bands_; }
  DType dtype() const noexcept { return dtype_; }
  std::int64_t width() const noexcept { return grid_.width; }
  std::int64_t height() const noexcept { return grid_.height; }
  std::size_t sample_count() const noexcept;

  std::size_t index(int band, std::int64_t row, std::int64_t col) const noexcept {
    return (static_cast<std::size_t>(band) * static_cast<std::size_t>(grid_.height) +
            static_cast<std::size_t>(row)) *
               static_cast<std::size_t>(grid_.width) +
           static_cast<std::size_t>(col);
  }

  // Throw ValidationError on dtype mismatch.
  std::span<std::uint8_t> u8();
  std::span<const std::uint8_t> u8() const;
  std::span<float> f32();
  std::span<const float> f32() const;

  // Sample as double regardless of dtype.
  double value(int band, std::int64_t row, std::int64_t col) const;

  // u8 with a single band and every sample in {0, 1}.
  bool is_binary() const;

  friend bool operator==(const Raster& a, const Raster& b);

 private:
  GridTransform grid_{};
  int bands_ = 0;
  DType dtype_ = DType::u8;
  std::variant<std::vector<std::uint8_t>, std::vector<float>> data_;
};

void require_same_grid(const GridTransform& a, const GridTransform& b, const char* what);
void require_binary(const Raster& r, const char* what);

// RRASTER1 container: magic, u32 LE header length, JSON header, LE samples.
std::string rras_encode(const Raster& raster);
Raster rras_decode(std::string_view bytes);
void rras_write(const Raster& raster, const std::filesystem::path& path);
Raster rras_read(const std::filesystem::path& path);

struct PreviewOptions {
  // Multiplier applied to u8 samples (clamped to 255), e.g. 255 for {0,1} masks.
  int u8_scale = 1;
};

// Binary PGM (one band) or PPM (three bands). f32 bands are scaled jointly from
// [min, max] to [0, 255]; a constant raster maps to 0.
void export_preview(const Raster& raster, const std::filesystem::path& path,
                    std::span<const int> bands, PreviewOptions options = {});
std::string encode_preview(const Raster& raster, std::span<const int> bands,
                           PreviewOptions options = {});

}  // namespace maskseg
