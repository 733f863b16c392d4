#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace toolmeta {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer shape disagreement. `layer` is the index within the chain,
// or npos when the mismatch is at the network boundary.
class ShapeError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  ShapeError(std::size_t layer, const std::string& what)
      : Error(layer == npos ? what : "layer " + std::to_string(layer) + ": " + what),
        layer_(layer) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(std::size_t layer, const std::string& what)
      : Error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  explicit NonFiniteError(const std::string& what)
      : Error(what), layer_(ShapeError::npos) {}
  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

class LayoutError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input file. `record` is the 1-based record (line)
// that triggered the failure, 0 when not applicable.
class FormatError : public Error {
 public:
  FormatError(std::size_t record, const std::string& what)
      : Error(record == 0 ? what : "record " + std::to_string(record) + ": " + what),
        record_(record) {}
  std::size_t record() const noexcept { return record_; }

 private:
  std::size_t record_;
};

class ConfigError : public Error {
 public:
  ConfigError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace toolmeta
