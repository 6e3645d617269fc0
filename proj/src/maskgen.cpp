#include "maskseg/maskgen.hpp"

#include <algorithm>
#include <cmath>

#include "maskseg/error.hpp"

namespace maskseg {
namespace {

struct RowColRange {
  std::int64_t r0, r1, c0, c1;  // inclusive
  bool empty() const { return r0 > r1 || c0 > c1; }
};

// Conservative pixel window whose centers may fall in [xmin,xmax]x[ymin,ymax];
// one pixel of slack on each side so rounding never excludes a candidate.
RowColRange candidate_pixels(const GridTransform& g, double xmin, double xmax, double ymin,
                             double ymax) {
  auto clampi = [](double v, std::int64_t lo, std::int64_t hi) {
    if (!(v > static_cast<double>(lo))) return lo;
    if (!(v < static_cast<double>(hi))) return hi;
    return static_cast<std::int64_t>(v);
  };
  const double c0 = std::floor((xmin - g.origin_x) / g.pixel_size - 0.5) - 1.0;
  const double c1 = std::ceil((xmax - g.origin_x) / g.pixel_size - 0.5) + 1.0;
  const double r0 = std::floor((g.origin_y - ymax) / g.pixel_size - 0.5) - 1.0;
  const double r1 = std::ceil((g.origin_y - ymin) / g.pixel_size - 0.5) + 1.0;
  if (c1 < 0.0 || r1 < 0.0 || c0 >= static_cast<double>(g.width) || r0 >= static_cast<double>(g.height)) {
    return {1, 0, 1, 0};
  }
  return {clampi(r0, 0, g.height - 1), clampi(r1, 0, g.height - 1), clampi(c0, 0, g.width - 1),
          clampi(c1, 0, g.width - 1)};
}

}  // namespace

void BufferSpec::validate() const {
  if (!(std::isfinite(radius) && radius >= 0.0)) throw ValidationError("buffer radius must be >= 0");
}

double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double t = 0.0;
  if (len2 > 0.0) {
    t = ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2;
    t = std::clamp(t, 0.0, 1.0);
  }
  const double ex = p.x - (a.x + t * dx);
  const double ey = p.y - (a.y + t * dy);
  return std::sqrt(ex * ex + ey * ey);
}

Raster rasterize_buffered_polylines(std::span<const Polyline> lines, const GridTransform& grid,
                                    BufferSpec spec) {
  spec.validate();
  Raster out(grid, 1, DType::u8);
  auto data = out.u8();
  // Each segment only visits the pixels whose centers can lie within radius;
  // membership itself is the exact distance test.
  for (const auto& line : lines) {
    for (std::size_t i = 0; i + 1 < line.vertices.size(); ++i) {
      const Point2 a = line.vertices[i];
      const Point2 b = line.vertices[i + 1];
      const auto win = candidate_pixels(grid, std::min(a.x, b.x) - spec.radius, std::max(a.x, b.x) + spec.radius,
                                        std::min(a.y, b.y) - spec.radius, std::max(a.y, b.y) + spec.radius);
      if (win.empty()) continue;
      for (std::int64_t r = win.r0; r <= win.r1; ++r) {
        for (std::int64_t c = win.c0; c <= win.c1; ++c) {
          auto& px = data[out.index(0, r, c)];
          if (px) continue;
          if (point_segment_distance(pixel_center(grid, r, c), a, b) <= spec.radius) px = 1;
        }
      }
    }
  }
  return out;
}

Raster rasterize_polygons(std::span<const Polygon> polygons, const GridTransform& grid) {
  for (const auto& p : polygons) validate(p);
  Raster out(grid, 1, DType::u8);
  auto data = out.u8();
  std::vector<double> crossings;
  for (const auto& poly : polygons) {
    double xmin = poly.outer.front().x, xmax = xmin, ymin = poly.outer.front().y, ymax = ymin;
    auto extend = [&](const std::vector<Point2>& ring) {
      for (const auto& v : ring) {
        xmin = std::min(xmin, v.x);
        xmax = std::max(xmax, v.x);
        ymin = std::min(ymin, v.y);
        ymax = std::max(ymax, v.y);
      }
    };
    extend(poly.outer);
    for (const auto& hole : poly.holes) extend(hole);
    const auto win = candidate_pixels(grid, xmin, xmax, ymin, ymax);
    if (win.empty()) continue;
    for (std::int64_t r = win.r0; r <= win.r1; ++r) {
      const double yc = pixel_center(grid, r, 0).y;
      crossings.clear();
      auto collect = [&](const std::vector<Point2>& ring) {
        for (std::size_t i = 0; i < ring.size(); ++i) {
          const Point2 a = ring[i];
          const Point2 b = ring[(i + 1) % ring.size()];
          if (edge_spans(a, b, yc)) crossings.push_back(edge_crossing_x(a, b, yc));
        }
      };
      collect(poly.outer);
      for (const auto& hole : poly.holes) collect(hole);
      if (crossings.empty()) continue;
      std::sort(crossings.begin(), crossings.end());
      for (std::int64_t c = win.c0; c <= win.c1; ++c) {
        const double xc = pixel_center(grid, r, c).x;
        const auto right = crossings.end() - std::upper_bound(crossings.begin(), crossings.end(), xc);
        if (right % 2 == 1) data[out.index(0, r, c)] = 1;
      }
    }
  }
  return out;
}

Raster apply_mask(const Raster& values, const Raster& mask) {
  require_same_grid(values.grid(), mask.grid(), "apply_mask");
  require_binary(mask, "mask");
  Raster out = values;
  const auto m = mask.u8();
  const std::size_t npix = values.grid().pixel_count();
  for (int b = 0; b < values.bands(); ++b) {
    for (std::size_t i = 0; i < npix; ++i) {
      if (m[i]) continue;
      const std::size_t k = static_cast<std::size_t>(b) * npix + i;
      if (out.dtype() == DType::u8) {
        out.u8()[k] = 0;
      } else {
        out.f32()[k] = 0.0f;
      }
    }
  }
  return out;
}

}  // namespace maskseg
