#pragma once

#include <span>

#include "maskseg/geodata.hpp"
#include "maskseg/raster.hpp"

namespace maskseg {

struct BufferSpec {
  double radius = 5.0;  // meters on each side of the centerline

  void validate() const;
};

// Euclidean distance from p to the closed segment ab (a == b allowed).
double point_segment_distance(Point2 p, Point2 a, Point2 b);

// Pixel is 1 iff its center lies within radius of any polyline segment.
Raster rasterize_buffered_polylines(std::span<const Polyline> lines, const GridTransform& grid,
                                    BufferSpec spec = {});

// Pixel is 1 iff its center is inside any polygon under the even-odd rule with
// half-open edges: an edge crosses the ray at yc iff y1 <= yc < y2 or
// y2 <= yc < y1, and counts when its x-intersection is strictly right of xc.
Raster rasterize_polygons(std::span<const Polygon> polygons, const GridTransform& grid);

// x-intersection of edge (a, b) with the horizontal line y = yc. Shared by the
// scanline rasterizer and any per-pixel reference so both round identically.
inline double edge_crossing_x(Point2 a, Point2 b, double yc) {
  return a.x + (yc - a.y) * (b.x - a.x) / (b.y - a.y);
}

inline bool edge_spans(Point2 a, Point2 b, double yc) {
  return (a.y <= yc && yc < b.y) || (b.y <= yc && yc < a.y);
}

// Samples kept where mask == 1, zeroed elsewhere, for every band.
Raster apply_mask(const Raster& values, const Raster& mask);

}  // namespace maskseg
