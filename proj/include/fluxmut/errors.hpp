#pragma once

#include <stdexcept>
#include <string>

#include "fluxmut/types.hpp"

namespace fluxmut {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Incompatible shapes between operands or between a model and its input.
struct DimensionError : Error {
  using Error::Error;
};

/// Non-finite values where finite reals are required.
struct NumericError : Error {
  using Error::Error;
};

/// Bad dataset content or sizes (empty batch, constant column, missing label).
struct DataError : Error {
  using Error::Error;
};

/// Invalid configuration values or unknown keys.
struct ConfigError : Error {
  using Error::Error;
};

/// API misuse (stale tape, uninitialized state).
struct UsageError : Error {
  using Error::Error;
};

/// File and parse problems (CSV, model JSON).
struct IoError : Error {
  using Error::Error;
};

void ensure_finite(const Matrix& m, const std::string& what);
void ensure_finite(double v, const std::string& what);

}  // namespace fluxmut
