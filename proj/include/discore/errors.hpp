#pragma once

#include <stdexcept>
#include <string>

namespace discore {

// Error taxonomy mirrors the CLI exit-code contract:
//   ConfigError -> 2, NumericError -> 3, CheckpointError -> 4, CapError -> 5.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration or input data caught before numerics start: parse errors,
// invalid key/value, inconsistent (T, h, K, delta), missing files, p0 without
// full support where the score bound needs one.
struct ConfigError : Error {
  using Error::Error;
};

// Domain violations encountered mid-computation: NaN/Inf loss, Poisson guard
// exceeded, rate-bound violation, divergence arguments out of domain,
// quadrature or interpolant construction failure.
struct NumericError : Error {
  using Error::Error;
};

// Checkpoint file corruption or header mismatch across a checkpoint set.
struct CheckpointError : Error {
  using Error::Error;
};

// Dense-enumeration oracle requested beyond the S^d cap.
struct CapError : Error {
  using Error::Error;
};

}  // namespace discore
