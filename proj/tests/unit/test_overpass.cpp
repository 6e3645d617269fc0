#include <doctest.h>

#include <cmath>
#include <sstream>

#include "maskseg/cli.hpp"
#include "maskseg/error.hpp"
#include "maskseg/overpass.hpp"
#include "support/http_fixture.hpp"

using namespace maskseg;
using maskseg::testing::FixtureServer;
using maskseg::testing::load_http_fixture;
using maskseg::testing::ReplayTransport;

namespace {
const GeoBBox kBox{53.5, 9.9, 53.6, 10.0};

std::string form_decode(std::string_view s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '+') {
      out += ' ';
    } else if (s[i] == '%' && i + 2 < s.size()) {
      out += static_cast<char>(std::stoi(std::string(s.substr(i + 1, 2)), nullptr, 16));
      i += 2;
    } else {
      out += s[i];
    }
  }
  return out;
}
}  // namespace

TEST_CASE("build_overpass_query") {
  const std::vector<std::string> primary{"primary"};
  CHECK(build_overpass_query(kBox, primary) ==
        R"([out:json][timeout:60];way["highway"~"^(primary)$"](53.5000000,9.9000000,53.6000000,10.0000000);out geom;)");

  const auto q = build_overpass_query(kBox, default_highway_classes());
  CHECK(q.find("motorway|trunk|primary|secondary|tertiary|unclassified|residential") != std::string::npos);
  CHECK(q == build_overpass_query(kBox, default_highway_classes()));

  const std::vector<std::string> links{"primary", "primary_link"};
  CHECK(build_overpass_query(kBox, links).find("^(primary|primary_link)$") != std::string::npos);

  const std::vector<std::string> bad{"primary\"];node"};
  CHECK_THROWS_AS(build_overpass_query(kBox, bad), ValidationError);
  CHECK_THROWS_AS(build_overpass_query(kBox, std::vector<std::string>{}), ValidationError);
}

TEST_CASE("parse_overpass_response on handcrafted elements") {
  const LocalProjection proj{10.0, 53.5};
  const auto fs = parse_overpass_response(R"({"elements":[
      {"type":"node","id":1,"lat":53.5,"lon":10.0},
      {"type":"way","id":7,"geometry":[{"lat":53.5,"lon":10.0},{"lat":54.5,"lon":10.0}]}]})",
                                          proj);
  REQUIRE(fs.polylines.size() == 1);
  const auto& v = fs.polylines[0].vertices;
  CHECK(v[0].x == 0.0);
  CHECK(v[0].y == 0.0);
  CHECK(v[1].x == 0.0);
  CHECK(std::abs(v[1].y - 111319.4908) <= 1e-3);

  try {
    parse_overpass_response(R"({"elements":[{"type":"way","id":4043866,"nodes":[1,2]}]})", proj);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("4043866") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_overpass_response("{\"elements\":[", proj), ParseError);
}

TEST_CASE("fixture replay through the transport seam") {
  const LocalProjection proj{9.99, 53.55};

  SUBCASE("two ways") {
    ReplayTransport t(load_http_fixture("overpass_two_ways.http"));
    const auto body = fetch_roads(std::string(kDefaultOverpassEndpoint), kBox, default_highway_classes(), t);
    CHECK(t.last_url == kDefaultOverpassEndpoint);
    CHECK(t.last_content_type == "application/x-www-form-urlencoded");
    REQUIRE(t.last_body.rfind("data=", 0) == 0);
    CHECK(form_decode(t.last_body.substr(5)) == build_overpass_query(kBox, default_highway_classes()));
    const auto fs = parse_overpass_response(body, proj);
    CHECK(fs.polylines.size() == 2);
    CHECK(fs.polylines[0].vertices.size() == 4);
    CHECK(fs.polylines[1].vertices.size() == 3);
  }
  SUBCASE("empty result") {
    ReplayTransport t(load_http_fixture("overpass_empty.http"));
    const auto body = fetch_roads(std::string(kDefaultOverpassEndpoint), kBox, default_highway_classes(), t);
    CHECK(parse_overpass_response(body, proj).polylines.empty());
  }
  SUBCASE("node-only result") {
    ReplayTransport t(load_http_fixture("overpass_nodes_only.http"));
    const auto body = fetch_roads(std::string(kDefaultOverpassEndpoint), kBox, default_highway_classes(), t);
    CHECK(parse_overpass_response(body, proj).polylines.empty());
  }
  SUBCASE("429 is a rate-limit error with retry-after") {
    ReplayTransport t(load_http_fixture("overpass_429.http"));
    try {
      fetch_roads(std::string(kDefaultOverpassEndpoint), kBox, default_highway_classes(), t);
      FAIL("expected NetworkError");
    } catch (const NetworkError& e) {
      CHECK(e.status() == 429);
      CHECK(e.rate_limited());
      REQUIRE(e.retry_after().has_value());
      CHECK(*e.retry_after() == "30");
    }
  }
  SUBCASE("other non-200 statuses carry the status") {
    ReplayTransport t(HttpResponse{504, "Gateway Timeout", std::nullopt});
    try {
      fetch_roads(std::string(kDefaultOverpassEndpoint), kBox, default_highway_classes(), t);
      FAIL("expected NetworkError");
    } catch (const NetworkError& e) {
      CHECK(e.status() == 504);
      CHECK_FALSE(e.rate_limited());
    }
  }
}

TEST_CASE("loopback server exercises the HTTP client") {
  SUBCASE("200 with the two-way fixture") {
    FixtureServer server(load_http_fixture("overpass_two_ways.http"));
    const auto body = fetch_roads(server.url(), kBox, default_highway_classes());
    CHECK(form_decode(server.last_body.substr(5)) == build_overpass_query(kBox, default_highway_classes()));
    CHECK(parse_overpass_response(body, LocalProjection{9.99, 53.55}).polylines.size() == 2);
  }
  SUBCASE("429 keeps Retry-After") {
    FixtureServer server(load_http_fixture("overpass_429.http"));
    try {
      fetch_roads(server.url(), kBox, default_highway_classes());
      FAIL("expected NetworkError");
    } catch (const NetworkError& e) {
      CHECK(e.rate_limited());
      CHECK(e.retry_after().value_or("") == "30");
    }
  }
  SUBCASE("slow server times out") {
    FixtureServer server(load_http_fixture("overpass_empty.http"), 2500);
    CHECK_THROWS_AS(fetch_roads(server.url(), kBox, default_highway_classes(), std::chrono::seconds(1)),
                    TimeoutError);
  }
}

TEST_CASE("fetch-roads CLI maps 429 to exit code 3") {
  FixtureServer server(load_http_fixture("overpass_429.http"));
  const auto dir = std::filesystem::temp_directory_path() / "maskseg_overpass_cli";
  std::filesystem::create_directories(dir);
  std::ostringstream out, err;
  const int code = cli::dispatch({"fetch-roads", "--bbox", "53.5,9.9,53.6,10.0", "--out",
                                  (dir / "roads.geojson").string(), "--endpoint", server.url()},
                                 out, err);
  CHECK(code == 3);
  CHECK(err.str().find("429") != std::string::npos);
}

TEST_CASE("fetch-roads CLI writes projected GeoJSON") {
  FixtureServer server(load_http_fixture("overpass_two_ways.http"));
  const auto dir = std::filesystem::temp_directory_path() / "maskseg_overpass_cli";
  std::filesystem::create_directories(dir);
  const auto path = dir / "roads_ok.geojson";
  std::ostringstream out, err;
  const int code = cli::dispatch({"fetch-roads", "--bbox", "53.5,9.9,53.6,10.0", "--out", path.string(),
                                  "--endpoint", server.url(), "--proj", "9.99,53.55"},
                                 out, err);
  REQUIRE(code == 0);
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(parse_geojson(text).features.polylines.size() == 2);
}
