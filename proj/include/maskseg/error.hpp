#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace maskseg {

enum class ErrorKind {
  usage,
  io,
  format,
  parse,
  validation,
  bounds,
  network,
  timeout,
};

// Base of every error the library throws. The kind decides the CLI exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::format, what) {}
};

// Malformed text input; byte_offset points at the offending byte.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(ErrorKind::parse, what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class BoundsError : public Error {
 public:
  explicit BoundsError(const std::string& what) : Error(ErrorKind::bounds, what) {}
};

class NetworkError : public Error {
 public:
  NetworkError(const std::string& what, int status = 0,
               std::optional<std::string> retry_after = std::nullopt)
      : Error(ErrorKind::network, what), status_(status), retry_after_(std::move(retry_after)) {}

  // 0 when the request never produced an HTTP status.
  int status() const noexcept { return status_; }
  bool rate_limited() const noexcept { return status_ == 429; }
  const std::optional<std::string>& retry_after() const noexcept { return retry_after_; }

 private:
  int status_;
  std::optional<std::string> retry_after_;
};

class TimeoutError : public Error {
 public:
  explicit TimeoutError(const std::string& what) : Error(ErrorKind::timeout, what) {}
};

// 1 usage, 2 I/O or format, 3 network, 4 validation.
int exit_code_for(ErrorKind kind) noexcept;

}  // namespace maskseg
