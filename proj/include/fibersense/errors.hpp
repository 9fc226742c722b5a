#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fibersense {

// Every failure the library reports derives from Error so callers at the
// service boundary can map them onto a single {ok: false, error} shape.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ScriptError : public Error {
 public:
  using Error::Error;
};

class StreamError : public Error {
 public:
  using Error::Error;
};

class WarmupError : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class DatasetError : public Error {
 public:
  using Error::Error;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  using Error::Error;
};

class ModeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed recording. `offset()` is the byte position where decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace fibersense
