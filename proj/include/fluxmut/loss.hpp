#pragma once

#include "fluxmut/types.hpp"

namespace fluxmut {

struct HuberResult {
  double loss = 0.0;  // mean over elements
  Vector grad;        // elementwise d(loss_i)/d(residual_i)
};

/// Piecewise loss on a residual vector: quadratic r^2/2 inside |r| <= delta,
/// linear delta*(|r| - delta/2) outside. The returned loss is the mean over
/// elements; grad holds the per-element derivative of the per-element loss
/// (callers dividing by the element count recover the gradient of the mean).
HuberResult huber_loss(const Vector& residual, double delta);

}  // namespace fluxmut
