#include "oscattn/propagator.hpp"

#include <algorithm>
#include <cmath>

namespace osc {

Propagator<double> expm_oracle(double a11, double a12, double a21, double a22, double t) {
  for (double v : {a11, a12, a21, a22, t}) {
    if (!std::isfinite(v)) throw RangeError("expm_oracle: non-finite input");
  }
  Propagator<double> m{a11 * t, a12 * t, a21 * t, a22 * t};
  const double norm = std::max(std::abs(m.m11) + std::abs(m.m12), std::abs(m.m21) + std::abs(m.m22));
  if (norm > 700.0) throw MagnitudeError("expm_oracle: |A t| too large for double exponent range");

  int squarings = 0;
  if (norm > 0.25) squarings = static_cast<int>(std::ceil(std::log2(norm / 0.25)));
  const double scale = std::ldexp(1.0, -squarings);
  m = {m.m11 * scale, m.m12 * scale, m.m21 * scale, m.m22 * scale};

  // Taylor core; |m| <= 1/4 so 18 terms are far below double resolution.
  Propagator<double> result{1.0, 0.0, 0.0, 1.0};
  Propagator<double> term{1.0, 0.0, 0.0, 1.0};
  for (int k = 1; k <= 18; ++k) {
    term = term * m;
    const double inv = 1.0 / k;
    term = {term.m11 * inv, term.m12 * inv, term.m21 * inv, term.m22 * inv};
    result = {result.m11 + term.m11, result.m12 + term.m12, result.m21 + term.m21, result.m22 + term.m22};
  }
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

}  // namespace osc
