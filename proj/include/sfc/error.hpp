#pragma once

#include <stdexcept>
#include <string>

namespace sfc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input files or configuration values.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Start/goal not reachable, or inside an obstacle.
class InfeasibleQuery : public Error {
 public:
  using Error::Error;
};

/// A geometric precondition was violated (seed in collision, empty polytope...).
class GeometryError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfc
