#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace maskseg {

// Planar coordinates in meters: x easting, y northing.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

// At least two vertices and at least one segment of positive length.
struct Polyline {
  std::vector<Point2> vertices;
};

// Rings are implicitly closed; each has at least three distinct vertices.
struct Polygon {
  std::vector<Point2> outer;
  std::vector<std::vector<Point2>> holes;
};

struct FeatureSet {
  std::vector<Polyline> polylines;
  std::vector<Polygon> polygons;
};

// Geographic extent in WGS84 decimal degrees.
struct GeoBBox {
  double south = 0.0;
  double west = 0.0;
  double north = 0.0;
  double east = 0.0;

  void validate() const;
  static GeoBBox parse(std::string_view s_w_n_e);
};

// Origin of the local equirectangular plane.
struct LocalProjection {
  double lon0 = 0.0;
  double lat0 = 0.0;

  void validate() const;
};

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

inline constexpr double kEarthRadiusM = 6378137.0;

void validate(const Polyline& line);
void validate(const Polygon& polygon);
void validate(const FeatureSet& features);

// Count of distinct vertices in a ring, ignoring a repeated closing vertex.
std::size_t distinct_vertex_count(const std::vector<Point2>& ring);

struct GeoJsonParse {
  FeatureSet features;
  std::size_t skipped = 0;  // geometries of unsupported kinds (points, nulls)
};

// Reads LineString, MultiLineString, Polygon and MultiPolygon geometry from
// bare geometries, Features, FeatureCollections and GeometryCollections.
// Coordinates are used verbatim as planar (x, y).
GeoJsonParse parse_geojson(std::string_view text);

// FeatureCollection with one Feature per polyline, then one per polygon.
std::string to_geojson(const FeatureSet& features);

Point2 project_wgs84_local(double lon, double lat, const LocalProjection& proj);
LonLat unproject_local_wgs84(Point2 p, const LocalProjection& proj);

}  // namespace maskseg
