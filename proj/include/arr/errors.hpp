#pragma once

#include <stdexcept>
#include <string>

namespace arr {

// Error categories map 1:1 to CLI exit codes (see cli.hpp).
enum class ErrorCategory { Config, Data, Backend, Precondition, Internal };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string message)
      : std::runtime_error(std::move(message)), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

struct ConfigError : Error {
  explicit ConfigError(std::string m) : Error(ErrorCategory::Config, std::move(m)) {}
};

// Malformed input data: parse failures, schema violations, invariant breaks.
struct DataError : Error {
  explicit DataError(std::string m) : Error(ErrorCategory::Data, std::move(m)) {}
};

struct PreconditionError : Error {
  explicit PreconditionError(std::string m) : Error(ErrorCategory::Precondition, std::move(m)) {}
};

enum class BackendErrorKind {
  Transport,          // connection-level failure, retriable
  Timeout,            // retriable
  HttpStatus,         // retriable iff 429 or 5xx
  Auth,               // never retried
  MalformedResponse,  // never retried
  ExhaustedRetries,
};

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, std::string request_tag, std::string message,
               int http_status = 0)
      : Error(ErrorCategory::Backend,
              "[" + request_tag + "] " + std::move(message)),
        kind_(kind),
        request_tag_(std::move(request_tag)),
        http_status_(http_status) {}

  BackendErrorKind kind() const noexcept { return kind_; }
  const std::string& request_tag() const noexcept { return request_tag_; }
  int http_status() const noexcept { return http_status_; }

  bool retriable() const noexcept {
    switch (kind_) {
      case BackendErrorKind::Transport:
      case BackendErrorKind::Timeout:
        return true;
      case BackendErrorKind::HttpStatus:
        return http_status_ == 429 || (http_status_ >= 500 && http_status_ <= 599);
      default:
        return false;
    }
  }

 private:
  BackendErrorKind kind_;
  std::string request_tag_;
  int http_status_;
};

}  // namespace arr
