#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace graspfit {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mesh has edges not shared by exactly two triangles.
class NonWatertightError : public Error {
 public:
  NonWatertightError(std::string msg, std::vector<std::pair<int, int>> edges)
      : Error(std::move(msg)), bad_edges(std::move(edges)) {}
  std::vector<std::pair<int, int>> bad_edges;
};

class EmptyInteriorError : public Error {
 public:
  using Error::Error;
};

class DegenerateCameraError : public Error {
 public:
  using Error::Error;
};

class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

class BadIndexError : public Error {
 public:
  using Error::Error;
};

class MixedTopologyError : public Error {
 public:
  using Error::Error;
};

class MissingFrameError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries a line/field diagnostic where available.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace graspfit
