#include "fluxmut/loss.hpp"

#include <cmath>

#include "fluxmut/errors.hpp"

namespace fluxmut {

HuberResult huber_loss(const Vector& residual, double delta) {
  if (!(delta > 0.0)) throw ConfigError("huber_loss: delta must be positive");
  if (!residual.allFinite())
    throw NumericError("huber_loss: non-finite residual");
  if (residual.size() == 0) throw DataError("huber_loss: empty residual");

  HuberResult out;
  out.grad.resize(residual.size());
  double total = 0.0;
  for (Index i = 0; i < residual.size(); ++i) {
    const double r = residual[i];
    const double a = std::abs(r);
    if (a <= delta) {
      total += 0.5 * r * r;
      out.grad[i] = r;
    } else {
      total += delta * (a - 0.5 * delta);
      out.grad[i] = r > 0.0 ? delta : -delta;
    }
  }
  out.loss = total / static_cast<double>(residual.size());
  return out;
}

}  // namespace fluxmut
