#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace heliocast {

enum class ErrorCode {
  invalid_argument,
  parse,
  io,
  rank_deficient,
  not_found,
  version_mismatch,
  truncated,
  unknown_kind,
  corrupt,
  config,
  network,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::io: return "io_error";
    case ErrorCode::rank_deficient: return "rank_deficient";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::truncated: return "truncated";
    case ErrorCode::unknown_kind: return "unknown_kind";
    case ErrorCode::corrupt: return "corrupt";
    case ErrorCode::config: return "config_error";
    case ErrorCode::network: return "network_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the CSV readers; line numbers are 1-based and count the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error(ErrorCode::parse, "line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Transport or HTTP failure talking to a weather provider. Always retryable;
// status is 0 when no HTTP response was received.
class NetworkError : public Error {
 public:
  NetworkError(int status, const std::string& message)
      : Error(ErrorCode::network, message), status_(status) {}

  int status() const noexcept { return status_; }
  bool retryable() const noexcept { return true; }

 private:
  int status_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::invalid_argument, message);
}

}  // namespace heliocast
