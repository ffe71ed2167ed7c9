#include "oscattn/kernels.hpp"

#include <cmath>

namespace osc {

namespace {

// Below this |z| delta the explicit antiderivatives lose digits to
// cancellation; a cubic Taylor expansion in delta takes over.
constexpr double kDirectLimit = 1e-3;

// int_0^delta e^{-g s} cos(l s) ds and the matching sine integral, straight
// from the antiderivative e^{-g s}(l sin - g cos)/(g^2 + l^2).
std::pair<double, double> direct_cs(double delta, double g, double l) {
  const double r2 = g * g + l * l;
  if (std::sqrt(r2) * delta < kDirectLimit) {
    const double d2 = delta * delta;
    const double d3 = d2 * delta;
    const double c = delta - g * d2 / 2.0 + (g * g - l * l) * d3 / 6.0;
    const double s = l * d2 / 2.0 - g * l * d3 / 3.0;
    return {c, s};
  }
  const double e = std::exp(-g * delta);
  const double cs = std::cos(l * delta);
  const double sn = std::sin(l * delta);
  const double c = (g + e * (l * sn - g * cs)) / r2;
  const double s = (l - e * (g * sn + l * cs)) / r2;
  return {c, s};
}

}  // namespace

std::pair<double, double> particular_I1_I2(double delta, double gamma, double omega_d, double omega_j) {
  if (!(delta >= 0.0) || !(gamma >= 0.0)) throw RangeError("particular_I1_I2: require delta >= 0 and gamma >= 0");
  if (delta == 0.0) return {0.0, 0.0};
  const double lp = omega_d + omega_j;
  const double lm = omega_d - omega_j;
  const auto [cp, sp] = direct_cs(delta, gamma, lp);
  const auto [cm, sm] = direct_cs(delta, gamma, lm);
  // sin a cos b = (sin(a+b) + sin(a-b))/2,  sin a sin b = (cos(a-b) - cos(a+b))/2
  return {0.5 * (sp + sm), 0.5 * (cm - cp)};
}

}  // namespace osc
