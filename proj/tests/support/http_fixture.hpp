#pragma once

// Recorded HTTP responses stored as raw bytes: status line, headers, blank
// line, body.

#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>

#include "maskseg/overpass.hpp"

namespace maskseg::testing {

inline std::filesystem::path fixture_path(const std::string& name) {
  return std::filesystem::path(MASKSEG_FIXTURE_DIR) / name;
}

inline std::string read_fixture(const std::string& name) {
  std::ifstream in(fixture_path(name), std::ios::binary);
  if (!in) throw std::runtime_error("missing fixture " + name);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline HttpResponse load_http_fixture(const std::string& name) {
  const std::string raw = read_fixture(name);
  const auto head_end = raw.find("\r\n\r\n");
  if (head_end == std::string::npos) throw std::runtime_error("fixture without header terminator");
  HttpResponse resp;
  resp.body = raw.substr(head_end + 4);
  std::size_t pos = raw.find("\r\n");
  const std::string status_line = raw.substr(0, pos);
  resp.status = std::stoi(status_line.substr(status_line.find(' ') + 1, 3));
  while (pos < head_end) {
    const auto next = raw.find("\r\n", pos + 2);
    const std::string line = raw.substr(pos + 2, next - pos - 2);
    const auto colon = line.find(':');
    if (colon != std::string::npos && line.substr(0, colon) == "Retry-After") {
      resp.retry_after = line.substr(line.find_first_not_of(' ', colon + 1));
    }
    pos = next;
  }
  return resp;
}

// Answers every POST with the given fixture and records the last request body.
class ReplayTransport final : public HttpTransport {
 public:
  explicit ReplayTransport(HttpResponse resp) : resp_(std::move(resp)) {}
  HttpResponse post(const std::string& url, const std::string& body, const std::string& content_type,
                    std::chrono::seconds) override {
    last_url = url;
    last_body = body;
    last_content_type = content_type;
    return resp_;
  }
  std::string last_url, last_body, last_content_type;

 private:
  HttpResponse resp_;
};

// Loopback HTTP server replaying one fixture; exercises the real client.
class FixtureServer {
 public:
  explicit FixtureServer(HttpResponse resp, int delay_ms = 0) : resp_(std::move(resp)) {
    server_.Post("/api/interpreter", [this, delay_ms](const httplib::Request& req, httplib::Response& res) {
      if (delay_ms) std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
      last_body = req.body;
      res.status = resp_.status;
      if (resp_.retry_after) res.set_header("Retry-After", *resp_.retry_after);
      res.set_content(resp_.body, "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FixtureServer() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/api/interpreter"; }
  std::string last_body;

 private:
  HttpResponse resp_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace maskseg::testing
