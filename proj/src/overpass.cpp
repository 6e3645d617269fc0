#include "maskseg/overpass.hpp"

#include <cstdio>
#include <regex>

#include <httplib.h>
#include <json.hpp>

#include "maskseg/error.hpp"

namespace maskseg {
namespace {

using nlohmann::json;

bool valid_class(const std::string& c) {
  if (c.empty()) return false;
  for (const char ch : c) {
    if (!((ch >= 'a' && ch <= 'z') || ch == '_')) return false;
  }
  return true;
}

std::string fixed7(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.7f", v);
  return buf;
}

struct SplitUrl {
  std::string scheme_host_port;
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/?#]+)([/?].*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ValidationError("endpoint must be an http(s) URL: " + url);
  std::string path = m[2].matched ? m[2].str() : "/";
  if (path.front() == '?') path = "/" + path;
  return {m[1].str(), path};
}

}  // namespace

const std::vector<std::string>& default_highway_classes() {
  static const std::vector<std::string> classes{"motorway", "trunk",        "primary",
                                                "secondary", "tertiary",    "unclassified",
                                                "residential"};
  return classes;
}

std::string build_overpass_query(const GeoBBox& bbox, std::span<const std::string> classes) {
  bbox.validate();
  if (classes.empty()) throw ValidationError("highway class list is empty");
  std::string alternation;
  for (const auto& c : classes) {
    if (!valid_class(c)) throw ValidationError("invalid highway class '" + c + "'");
    if (!alternation.empty()) alternation += '|';
    alternation += c;
  }
  return "[out:json][timeout:60];way[\"highway\"~\"^(" + alternation + ")$\"](" +
         fixed7(bbox.south) + "," + fixed7(bbox.west) + "," + fixed7(bbox.north) + "," +
         fixed7(bbox.east) + ");out geom;";
}

std::string url_encode_form_value(std::string_view value) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (const unsigned char c : value) {
    const bool unreserved = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                            (c >= '0' && c <= '9') || c == '-' || c == '_' || c == '.' || c == '~';
    if (unreserved) {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xF];
    }
  }
  return out;
}

HttpResponse HttplibTransport::post(const std::string& url, const std::string& body,
                                    const std::string& content_type,
                                    std::chrono::seconds timeout) {
  const SplitUrl parts = split_url(url);
  httplib::Client client(parts.scheme_host_port);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  client.set_follow_location(true);

  auto result = client.Post(parts.path, body, content_type);
  if (!result) {
    const auto err = result.error();
    const std::string what = "request to " + url + " failed: " + httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw TimeoutError(what);
    }
    throw NetworkError(what);
  }
  HttpResponse resp;
  resp.status = result->status;
  resp.body = result->body;
  if (result->has_header("Retry-After")) resp.retry_after = result->get_header_value("Retry-After");
  return resp;
}

std::string fetch_roads(const std::string& endpoint, const GeoBBox& bbox,
                        std::span<const std::string> classes, HttpTransport& transport,
                        std::chrono::seconds timeout) {
  split_url(endpoint);
  const std::string query = build_overpass_query(bbox, classes);
  HttpResponse resp = transport.post(endpoint, "data=" + url_encode_form_value(query),
                                     "application/x-www-form-urlencoded", timeout);
  if (resp.status == 200) return std::move(resp.body);
  if (resp.status == 429) {
    std::string what = "Overpass rate limit (HTTP 429)";
    if (resp.retry_after) what += ", retry after " + *resp.retry_after + " s";
    throw NetworkError(what, 429, resp.retry_after);
  }
  throw NetworkError("Overpass returned HTTP " + std::to_string(resp.status), resp.status);
}

std::string fetch_roads(const std::string& endpoint, const GeoBBox& bbox,
                        std::span<const std::string> classes, std::chrono::seconds timeout) {
  HttplibTransport transport;
  return fetch_roads(endpoint, bbox, classes, transport, timeout);
}

FeatureSet parse_overpass_response(std::string_view bytes, const LocalProjection& proj) {
  proj.validate();
  json root;
  try {
    root = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed Overpass response: ") + e.what(), e.byte);
  }
  if (!root.is_object() || !root.contains("elements") || !root["elements"].is_array()) {
    throw FormatError("Overpass response has no elements array");
  }
  FeatureSet out;
  for (const auto& el : root["elements"]) {
    if (!el.is_object() || el.value("type", std::string{}) != "way") continue;
    const std::string id = el.contains("id") ? el["id"].dump() : std::string("?");
    const auto geom = el.find("geometry");
    if (geom == el.end() || !geom->is_array()) {
      throw FormatError("way " + id + " has no geometry (query must use 'out geom')");
    }
    Polyline line;
    for (const auto& node : *geom) {
      if (!node.is_object() || !node.contains("lat") || !node.contains("lon") ||
          !node["lat"].is_number() || !node["lon"].is_number()) {
        throw FormatError("way " + id + " has a geometry entry without lat/lon");
      }
      line.vertices.push_back(
          project_wgs84_local(node["lon"].get<double>(), node["lat"].get<double>(), proj));
    }
    // Zero-length ways (single node or repeated nodes) carry no road extent.
    try {
      validate(line);
    } catch (const ValidationError&) {
      continue;
    }
    out.polylines.push_back(std::move(line));
  }
  return out;
}

}  // namespace maskseg
