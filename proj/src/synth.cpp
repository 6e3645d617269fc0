#include "maskseg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "maskseg/error.hpp"
#include "maskseg/maskgen.hpp"
#include "maskseg/rng.hpp"

namespace maskseg {
namespace {

// Placement ranges, in pixels unless noted.
constexpr double kRoadLengthMin = 90.0;
constexpr double kRoadLengthMax = 160.0;
constexpr double kRoadWidthMin = 4.0;
constexpr double kRoadWidthMax = 8.0;
constexpr int kTreeRadiusMin = 4;
constexpr int kTreeRadiusMax = 10;
constexpr double kTreeRoadOffset = 22.0;  // max perpendicular offset of road-side trees
constexpr int kCrownVertices = 16;

using Rgb = std::array<int, 3>;
constexpr Rgb kBackground{112, 120, 96};
constexpr int kBackgroundNoise = 14;
constexpr Rgb kRoadColor{72, 72, 76};
constexpr int kRoadNoise = 6;
constexpr Rgb kTreeColor{46, 150, 52};
constexpr int kTreeNoise = 10;

struct RoadPx {
  double r0, c0, r1, c1, half_width;
};

std::uint8_t clamp_u8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

}  // namespace

SyntheticScene generate_synthetic_scene(std::uint64_t seed, std::int64_t width, std::int64_t height, int n_trees,
                                        int n_roads, double pixel_size) {
  if (width < 64 || height < 64) throw ValidationError("synthetic scene needs width and height >= 64");
  if (n_trees < 0 || n_roads < 0) throw ValidationError("tree and road counts must be >= 0");
  const GridTransform grid{0.0, static_cast<double>(height) * pixel_size, pixel_size, width, height};
  grid.validate();

  SplitMix64 rng(seed);
  const double W = static_cast<double>(width), H = static_cast<double>(height);
  auto to_world = [&](double row, double col) {
    return Point2{grid.origin_x + col * pixel_size, grid.origin_y - row * pixel_size};
  };

  SyntheticScene scene;

  std::vector<RoadPx> roads;
  for (int k = 0; k < n_roads; ++k) {
    const double cr = rng.uniform(0.1 * H, 0.9 * H);
    const double cc = rng.uniform(0.1 * W, 0.9 * W);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double length = rng.uniform(kRoadLengthMin, kRoadLengthMax);
    const double half_width = 0.5 * rng.uniform(kRoadWidthMin, kRoadWidthMax);
    const double dr = 0.5 * length * std::sin(angle), dc = 0.5 * length * std::cos(angle);
    roads.push_back({cr - dr, cc - dc, cr + dr, cc + dc, half_width});
    scene.roads.polylines.push_back({{to_world(cr - dr, cc - dc), to_world(cr + dr, cc + dc)}});
  }

  const int n_near = roads.empty() ? 0 : (3 * n_trees + 3) / 4;
  for (int k = 0; k < n_trees; ++k) {
    TreeDisk t;
    t.radius_px = static_cast<int>(rng.uniform_int(kTreeRadiusMin, kTreeRadiusMax));
    if (k < n_near) {
      // Centers snap to pixel corners so the crown polygon covers close to pi r^2 pixels.
      for (int attempt = 0; attempt < 64; ++attempt) {
        const auto& road = roads[static_cast<std::size_t>(rng.uniform_int(0, n_roads - 1))];
        const double s = rng.uniform();
        const double off = rng.uniform(-kTreeRoadOffset, kTreeRoadOffset);
        const double len = std::hypot(road.r1 - road.r0, road.c1 - road.c0);
        const double nr = (road.c1 - road.c0) / len, nc = -(road.r1 - road.r0) / len;
        t.row = std::round(road.r0 + s * (road.r1 - road.r0) + off * nr);
        t.col = std::round(road.c0 + s * (road.c1 - road.c0) + off * nc);
        if (t.row >= 0.0 && t.row <= H && t.col >= 0.0 && t.col <= W) break;
      }
      t.near_road = true;
    }
    if (!t.near_road || t.row < 0.0 || t.row > H || t.col < 0.0 || t.col > W) {
      t.row = static_cast<double>(rng.uniform_int(0, height));
      t.col = static_cast<double>(rng.uniform_int(0, width));
    }
    scene.trees.push_back(t);

    Polygon crown;
    for (int v = 0; v < kCrownVertices; ++v) {
      const double a = 2.0 * std::numbers::pi * v / kCrownVertices;
      crown.outer.push_back(to_world(t.row - t.radius_px * std::sin(a), t.col + t.radius_px * std::cos(a)));
    }
    scene.crowns.polygons.push_back(std::move(crown));
  }

  scene.image = Raster(grid, 3, DType::u8);
  auto px = scene.image.u8();
  auto paint = [&](std::int64_t r, std::int64_t c, const Rgb& base, int noise) {
    for (int b = 0; b < 3; ++b) {
      px[scene.image.index(b, r, c)] = clamp_u8(base[static_cast<std::size_t>(b)] +
                                                static_cast<int>(rng.uniform_int(-noise, noise)));
    }
  };
  for (std::int64_t r = 0; r < height; ++r) {
    for (std::int64_t c = 0; c < width; ++c) paint(r, c, kBackground, kBackgroundNoise);
  }
  for (const auto& road : roads) {
    const Point2 a{road.c0, road.r0}, b{road.c1, road.r1};
    const auto rlo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(road.r0, road.r1) - road.half_width)));
    const auto rhi = std::min<std::int64_t>(height - 1, static_cast<std::int64_t>(std::ceil(std::max(road.r0, road.r1) + road.half_width)));
    const auto clo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(road.c0, road.c1) - road.half_width)));
    const auto chi = std::min<std::int64_t>(width - 1, static_cast<std::int64_t>(std::ceil(std::max(road.c0, road.c1) + road.half_width)));
    for (std::int64_t r = rlo; r <= rhi; ++r) {
      for (std::int64_t c = clo; c <= chi; ++c) {
        const Point2 center{static_cast<double>(c) + 0.5, static_cast<double>(r) + 0.5};
        if (point_segment_distance(center, a, b) <= road.half_width) paint(r, c, kRoadColor, kRoadNoise);
      }
    }
  }
  for (const auto& t : scene.trees) {
    const auto rad = static_cast<double>(t.radius_px);
    for (auto r = std::max<std::int64_t>(0, static_cast<std::int64_t>(t.row - rad - 1));
         r <= std::min<std::int64_t>(height - 1, static_cast<std::int64_t>(t.row + rad + 1)); ++r) {
      for (auto c = std::max<std::int64_t>(0, static_cast<std::int64_t>(t.col - rad - 1));
           c <= std::min<std::int64_t>(width - 1, static_cast<std::int64_t>(t.col + rad + 1)); ++c) {
        if (std::hypot(static_cast<double>(r) + 0.5 - t.row, static_cast<double>(c) + 0.5 - t.col) <= rad) {
          paint(r, c, kTreeColor, kTreeNoise);
        }
      }
    }
  }
  return scene;
}

}  // namespace maskseg
