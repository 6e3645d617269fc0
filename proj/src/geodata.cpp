#include "maskseg/geodata.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "maskseg/error.hpp"
#include "parse_util.hpp"

namespace maskseg {
namespace {

using nlohmann::json;

constexpr double kDegToRad = std::numbers::pi / 180.0;

bool finite(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

class GeoJsonReader {
 public:
  GeoJsonParse run(const json& root) {
    const std::string type = type_of(root);
    if (type == "FeatureCollection") {
      const auto it = root.find("features");
      if (it == root.end() || !it->is_array()) fail("FeatureCollection without a features array");
      for (const auto& feature : *it) {
        read_feature(feature);
        ++feature_index_;
      }
    } else if (type == "Feature") {
      read_feature(root);
    } else {
      read_geometry(root);
    }
    return std::move(out_);
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ValidationError("feature " + std::to_string(feature_index_) + ": " + msg);
  }

  std::string type_of(const json& node) const {
    if (!node.is_object()) fail("expected a JSON object");
    const auto it = node.find("type");
    if (it == node.end() || !it->is_string()) fail("missing \"type\" member");
    return it->get<std::string>();
  }

  void read_feature(const json& feature) {
    if (type_of(feature) != "Feature") fail("expected a Feature");
    const auto it = feature.find("geometry");
    if (it == feature.end() || it->is_null()) {
      ++out_.skipped;
      return;
    }
    read_geometry(*it);
  }

  Point2 position(const json& node) const {
    if (!node.is_array() || node.size() < 2 || !node[0].is_number() || !node[1].is_number()) {
      fail("position must be an array of at least two numbers");
    }
    Point2 p{node[0].get<double>(), node[1].get<double>()};
    if (!finite(p)) fail("non-finite coordinate");
    return p;
  }

  std::vector<Point2> positions(const json& node) const {
    if (!node.is_array()) fail("coordinates must be an array");
    std::vector<Point2> pts;
    pts.reserve(node.size());
    for (const auto& p : node) pts.push_back(position(p));
    return pts;
  }

  std::vector<Point2> ring(const json& node) const {
    auto pts = positions(node);
    if (pts.size() > 1 && pts.front() == pts.back()) pts.pop_back();
    return pts;
  }

  void add_line(const json& coords) {
    Polyline line{positions(coords)};
    try {
      validate(line);
    } catch (const ValidationError& e) {
      fail(e.what());
    }
    out_.features.polylines.push_back(std::move(line));
  }

  void add_polygon(const json& coords) {
    if (!coords.is_array() || coords.empty()) fail("polygon needs at least one ring");
    Polygon poly;
    poly.outer = ring(coords[0]);
    for (std::size_t i = 1; i < coords.size(); ++i) poly.holes.push_back(ring(coords[i]));
    try {
      validate(poly);
    } catch (const ValidationError& e) {
      fail(e.what());
    }
    out_.features.polygons.push_back(std::move(poly));
  }

  const json& coordinates(const json& geom) const {
    const auto it = geom.find("coordinates");
    if (it == geom.end() || !it->is_array()) fail("geometry without coordinates");
    return *it;
  }

  void read_geometry(const json& geom) {
    const std::string type = type_of(geom);
    if (type == "LineString") {
      add_line(coordinates(geom));
    } else if (type == "MultiLineString") {
      for (const auto& part : coordinates(geom)) add_line(part);
    } else if (type == "Polygon") {
      add_polygon(coordinates(geom));
    } else if (type == "MultiPolygon") {
      for (const auto& part : coordinates(geom)) add_polygon(part);
    } else if (type == "GeometryCollection") {
      const auto it = geom.find("geometries");
      if (it == geom.end() || !it->is_array()) fail("GeometryCollection without geometries");
      for (const auto& g : *it) read_geometry(g);
    } else {
      ++out_.skipped;
    }
  }

  GeoJsonParse out_;
  std::size_t feature_index_ = 0;
};

json ring_json(const std::vector<Point2>& ring, bool close) {
  json coords = json::array();
  for (const auto& p : ring) coords.push_back({p.x, p.y});
  if (close && !ring.empty()) coords.push_back({ring.front().x, ring.front().y});
  return coords;
}

}  // namespace

void GeoBBox::validate() const {
  const bool ok = std::isfinite(south) && std::isfinite(north) && std::isfinite(west) &&
                  std::isfinite(east) && -90.0 <= south && south < north && north <= 90.0 &&
                  -180.0 <= west && west < east && east <= 180.0;
  if (!ok) throw ValidationError("bbox must satisfy -90<=south<north<=90 and -180<=west<east<=180");
}

GeoBBox GeoBBox::parse(std::string_view s_w_n_e) {
  const auto v = detail::parse_number_list(s_w_n_e, "bbox");
  if (v.size() != 4) throw ValidationError("bbox needs four values S,W,N,E");
  GeoBBox box{v[0], v[1], v[2], v[3]};
  box.validate();
  return box;
}

void LocalProjection::validate() const {
  if (!(std::isfinite(lon0) && std::isfinite(lat0) && lon0 >= -180.0 && lon0 <= 180.0 &&
        lat0 > -90.0 && lat0 < 90.0)) {
    throw ValidationError("projection origin needs -180<=lon0<=180 and |lat0|<90");
  }
}

std::size_t distinct_vertex_count(const std::vector<Point2>& ring) {
  std::vector<Point2> seen;
  for (const auto& p : ring) {
    bool dup = false;
    for (const auto& q : seen) dup = dup || (p == q);
    if (!dup) seen.push_back(p);
    if (seen.size() >= 3) break;
  }
  return seen.size();
}

void validate(const Polyline& line) {
  if (line.vertices.size() < 2) {
    throw ValidationError("polyline needs at least 2 vertices, got " +
                          std::to_string(line.vertices.size()));
  }
  bool has_length = false;
  for (std::size_t i = 0; i < line.vertices.size(); ++i) {
    if (!finite(line.vertices[i])) throw ValidationError("polyline has a non-finite vertex");
    if (i > 0 && !(line.vertices[i] == line.vertices[i - 1])) has_length = true;
  }
  if (!has_length) throw ValidationError("polyline has no segment of positive length");
}

void validate(const Polygon& polygon) {
  auto check = [](const std::vector<Point2>& ring, const char* role) {
    for (const auto& p : ring) {
      if (!finite(p)) throw ValidationError(std::string(role) + " ring has a non-finite vertex");
    }
    if (distinct_vertex_count(ring) < 3) {
      throw ValidationError(std::string(role) + " ring needs at least 3 distinct vertices");
    }
  };
  check(polygon.outer, "outer");
  for (const auto& hole : polygon.holes) check(hole, "hole");
}

void validate(const FeatureSet& features) {
  for (const auto& l : features.polylines) validate(l);
  for (const auto& p : features.polygons) validate(p);
}

GeoJsonParse parse_geojson(std::string_view text) {
  json root;
  try {
    root = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed GeoJSON: ") + e.what(), e.byte);
  }
  return GeoJsonReader{}.run(root);
}

std::string to_geojson(const FeatureSet& features) {
  json fc = {{"type", "FeatureCollection"}, {"features", json::array()}};
  for (const auto& line : features.polylines) {
    fc["features"].push_back(
        {{"type", "Feature"},
         {"properties", json::object()},
         {"geometry", {{"type", "LineString"}, {"coordinates", ring_json(line.vertices, false)}}}});
  }
  for (const auto& poly : features.polygons) {
    json rings = json::array();
    rings.push_back(ring_json(poly.outer, true));
    for (const auto& hole : poly.holes) rings.push_back(ring_json(hole, true));
    fc["features"].push_back({{"type", "Feature"},
                              {"properties", json::object()},
                              {"geometry", {{"type", "Polygon"}, {"coordinates", rings}}}});
  }
  return fc.dump() + "\n";
}

Point2 project_wgs84_local(double lon, double lat, const LocalProjection& proj) {
  const double k = std::cos(proj.lat0 * kDegToRad);
  return {kEarthRadiusM * k * (lon - proj.lon0) * kDegToRad,
          kEarthRadiusM * (lat - proj.lat0) * kDegToRad};
}

LonLat unproject_local_wgs84(Point2 p, const LocalProjection& proj) {
  const double k = std::cos(proj.lat0 * kDegToRad);
  return {proj.lon0 + p.x / (kEarthRadiusM * k * kDegToRad),
          proj.lat0 + p.y / (kEarthRadiusM * kDegToRad)};
}

}  // namespace maskseg
