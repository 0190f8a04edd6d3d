#pragma once

#include <string>

#include "fluxmut/types.hpp"

namespace fluxmut {

/// Per-column standardization: z = (x - shift) / scale with scale = sample sd.
struct StandardScaler {
  Vector shift;
  Vector scale;

  Index dim() const { return shift.size(); }
  Matrix transform(const Matrix& x) const;
  Matrix inverse(const Matrix& z) const;
  Vector transform(const Vector& x) const;
  Vector inverse(const Vector& z) const;
};

/// Per-column affine map onto [0, 1] from the observed [lo, hi] range.
/// Out-of-range inputs clamp to [-0.05, 1.05] in scaled units (warned).
struct RangeScaler {
  Vector lo;
  Vector hi;

  Index dim() const { return lo.size(); }
  Matrix transform(const Matrix& x, bool* clamped = nullptr) const;
  Vector transform(const Vector& x, bool* clamped = nullptr) const;
  Matrix inverse(const Matrix& z) const;
};

/// Throws DataError naming the offending column if any column is constant.
StandardScaler fit_standard_scaler(const Matrix& x,
                                   const std::string& column_prefix);
RangeScaler fit_range_scaler(const Matrix& x, const std::string& column_prefix);

}  // namespace fluxmut
