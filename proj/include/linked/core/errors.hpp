#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace linked {

// Base for every error raised by the toolkit. Stage code catches this type
// to attach stage/question context before reporting.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class GatewayError : public Error {
 public:
  using Error::Error;
};

class NetworkError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class RateLimitError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class MalformedResponseError : public GatewayError {
 public:
  using GatewayError::GatewayError;
};

class ElicitationError : public Error {
 public:
  using Error::Error;
};

class ScorerError : public Error {
 public:
  using Error::Error;
};

}  // namespace linked
