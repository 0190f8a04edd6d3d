#include "fluxmut/scaler.hpp"

#include <cmath>
#include <string>

#include "fluxmut/errors.hpp"
#include "fluxmut/log.hpp"

namespace fluxmut {

namespace {
constexpr double kClampLo = -0.05;
constexpr double kClampHi = 1.05;
}  // namespace

Matrix StandardScaler::transform(const Matrix& x) const {
  if (x.cols() != dim()) throw DimensionError("scaler: column count mismatch");
  return (x.rowwise() - shift.transpose()).array().rowwise() /
         scale.transpose().array();
}

Matrix StandardScaler::inverse(const Matrix& z) const {
  if (z.cols() != dim()) throw DimensionError("scaler: column count mismatch");
  return (z.array().rowwise() * scale.transpose().array()).matrix().rowwise() +
         shift.transpose();
}

Vector StandardScaler::transform(const Vector& x) const {
  return transform(Matrix(x.transpose())).row(0).transpose();
}

Vector StandardScaler::inverse(const Vector& z) const {
  return inverse(Matrix(z.transpose())).row(0).transpose();
}

Matrix RangeScaler::transform(const Matrix& x, bool* clamped) const {
  if (x.cols() != dim()) throw DimensionError("scaler: column count mismatch");
  Matrix z = (x.rowwise() - lo.transpose()).array().rowwise() /
             (hi - lo).transpose().array();
  bool any_clamped = (z.array() < kClampLo).any() || (z.array() > kClampHi).any();
  if (any_clamped) {
    z = z.array().max(kClampLo).min(kClampHi);
    warn("condition value outside the training range; clamped");
  }
  if (clamped) *clamped = any_clamped;
  return z;
}

Vector RangeScaler::transform(const Vector& x, bool* clamped) const {
  return transform(Matrix(x.transpose()), clamped).row(0).transpose();
}

Matrix RangeScaler::inverse(const Matrix& z) const {
  if (z.cols() != dim()) throw DimensionError("scaler: column count mismatch");
  return (z.array().rowwise() * (hi - lo).transpose().array())
             .matrix()
             .rowwise() +
         lo.transpose();
}

StandardScaler fit_standard_scaler(const Matrix& x,
                                    const std::string& column_prefix) {
  if (x.rows() < 2) throw DataError("scaler: need at least 2 rows");
  StandardScaler s;
  s.shift = x.colwise().mean();
  s.scale.resize(x.cols());
  for (Index j = 0; j < x.cols(); ++j) {
    const double var =
        (x.col(j).array() - s.shift[j]).square().sum() /
        static_cast<double>(x.rows() - 1);
    if (!(var > 0.0))
      throw DataError("scaler: column " + column_prefix +
                      std::to_string(j + 1) + " is constant");
    s.scale[j] = std::sqrt(var);
  }
  return s;
}

RangeScaler fit_range_scaler(const Matrix& x, const std::string& column_prefix) {
  if (x.rows() < 2) throw DataError("scaler: need at least 2 rows");
  RangeScaler s;
  s.lo = x.colwise().minCoeff();
  s.hi = x.colwise().maxCoeff();
  for (Index j = 0; j < x.cols(); ++j) {
    if (!(s.hi[j] > s.lo[j]))
      throw DataError("scaler: column " + column_prefix +
                      std::to_string(j + 1) + " is constant");
  }
  return s;
}

}  // namespace fluxmut
