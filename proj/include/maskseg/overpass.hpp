#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maskseg/geodata.hpp"

namespace maskseg {

// Main drivable road classes used when the caller does not override them.
const std::vector<std::string>& default_highway_classes();

inline constexpr std::string_view kDefaultOverpassEndpoint = "https://overpass-api.de/api/interpreter";
inline constexpr std::chrono::seconds kDefaultOverpassTimeout{60};

// [out:json][timeout:60];way["highway"~"^(c1|c2)$"](S,W,N,E);out geom;
std::string build_overpass_query(const GeoBBox& bbox, std::span<const std::string> classes);

struct HttpResponse {
  int status = 0;
  std::string body;
  std::optional<std::string> retry_after;
};

// Seam between the Overpass client and the wire; tests substitute a replay.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::string& content_type, std::chrono::seconds timeout) = 0;
};

// cpp-httplib backed transport. Throws TimeoutError or NetworkError when no
// response arrives.
class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::string& content_type, std::chrono::seconds timeout) override;
};

std::string url_encode_form_value(std::string_view value);

// POSTs data=<query> and returns the body of a 200 response. Other statuses
// raise NetworkError (429 carries Retry-After when present).
std::string fetch_roads(const std::string& endpoint, const GeoBBox& bbox,
                        std::span<const std::string> classes, HttpTransport& transport,
                        std::chrono::seconds timeout = kDefaultOverpassTimeout);

std::string fetch_roads(const std::string& endpoint, const GeoBBox& bbox,
                        std::span<const std::string> classes,
                        std::chrono::seconds timeout = kDefaultOverpassTimeout);

// Every `way` element with `out geom` geometry becomes one projected polyline,
// in element order. Other element types are ignored.
FeatureSet parse_overpass_response(std::string_view bytes, const LocalProjection& proj);

}  // namespace maskseg
