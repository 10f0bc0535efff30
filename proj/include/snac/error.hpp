#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace snac {

// Shape or argument contract violated by a tensor op.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Invalid configuration: dimensions, modes, unknown keys.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A NaN or Inf appeared. `op` names the first operation that produced it.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::string op, const std::string& detail)
      : std::runtime_error("non-finite value produced by '" + op + "'" +
                           (detail.empty() ? "" : ": " + detail)),
        op_(std::move(op)) {}
  const std::string& op() const noexcept { return op_; }

 private:
  std::string op_;
};

// File missing, unreadable or malformed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace snac
