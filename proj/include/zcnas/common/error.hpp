#pragma once

#include <stdexcept>
#include <string>

namespace zc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised for malformed graphs: mismatched shapes, cycles, unknown operators.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A forward or backward pass produced a non-finite value. `node` is the
// offending node id (or -1 when the loss itself blew up).
class NumericalError : public Error {
 public:
  NumericalError(int node, const std::string& what) : Error(what), node_(node) {}
  int node() const noexcept { return node_; }

 private:
  int node_;
};

// The model cannot be scored by a metric (e.g. a constant input Jacobian).
class DegenerateModel : public Error {
 public:
  using Error::Error;
};

}  // namespace zc
