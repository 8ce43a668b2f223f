#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dym {

/// Base type for all recoverable errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration value outside its documented range, or an unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data does not span enough geometry to fix a rigid transform
/// (fewer than three pairs, or collinear points).
class DegenerateGeometry : public Error {
 public:
  using Error::Error;
};

class NonPositiveDisparity : public Error {
 public:
  using Error::Error;
};

/// Left/right rows differ beyond the rectification tolerance.
class EpipolarViolation : public Error {
 public:
  using Error::Error;
};

class BehindCamera : public Error {
 public:
  using Error::Error;
};

class OutOfImage : public Error {
 public:
  using Error::Error;
};

class EmptyScene : public Error {
 public:
  using Error::Error;
};

class InsufficientHypotheses : public Error {
 public:
  using Error::Error;
};

class NoModelsFound : public Error {
 public:
  using Error::Error;
};

class NonPositiveDepth : public Error {
 public:
  using Error::Error;
};

class LengthMismatch : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NoOverlap : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; message carries the offending path and line.
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what),
        path_(path),
        line_(line) {}

  const std::string& path() const { return path_; }
  std::size_t line() const { return line_; }

 private:
  std::string path_;
  std::size_t line_;
};

class VersionMismatch : public Error {
 public:
  using Error::Error;
};

class IoFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace dym
