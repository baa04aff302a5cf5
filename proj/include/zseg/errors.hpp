#pragma once

#include <stdexcept>
#include <string>

namespace zseg {

/// Tensor or array dimensions that do not fit an operator's contract.
class ShapeError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// NaN/Inf produced by a forward or backward computation.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent dataset on disk.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment or optimizer configuration.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class CheckpointFault { io, bad_magic, version, truncated, architecture, names, shape };

class CheckpointError : public std::runtime_error {
public:
  CheckpointError(CheckpointFault fault, const std::string& what)
      : std::runtime_error(what), fault_(fault) {}
  CheckpointFault fault() const noexcept { return fault_; }

private:
  CheckpointFault fault_;
};

/// A zonal-mask invariant that should hold by construction was broken.
class InvariantError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

}  // namespace zseg
