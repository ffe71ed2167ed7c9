#pragma once

// Homogeneous flow e^{At} of one oscillator channel,
//   A = [[0, 1], [-omega0^2, -2 gamma]],
// in closed form for all three damping regimes, plus a scaling-and-squaring
// matrix exponential used only as a test oracle.

#include <array>
#include <utility>
#include <variant>

#include "oscattn/core.hpp"

namespace osc {

template <class T = double>
struct Propagator {
  T m11{}, m12{}, m21{}, m22{};

  T det() const { return m11 * m22 - m12 * m21; }

  State2<T> apply(const State2<T>& z) const { return {m11 * z.x + m12 * z.p, m21 * z.x + m22 * z.p}; }

  Propagator operator*(const Propagator& o) const {
    return {m11 * o.m11 + m12 * o.m21, m11 * o.m12 + m12 * o.m22,  //
            m21 * o.m11 + m22 * o.m21, m21 * o.m12 + m22 * o.m22};
  }
};

namespace detail {

/// (e^{-gamma t} c(t), e^{-gamma t} sn(t)) where c, sn are the even/odd
/// fundamental solutions of x'' + (omega0^2 - gamma^2) x = 0:
///   underdamped  c = cos(wd t),   sn = sin(wd t) / wd
///   critical     c = 1,           sn = t
///   overdamped   c = cosh(s t),   sn = sinh(s t) / s
/// Every regime-dependent quantity in the library is built from this pair.
template <class T>
std::pair<T, T> damped_flow_basis(const OscParams<T>& p, const DampingRegime<T>& regime, double t) {
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::sin;
  using std::sinh;
  const T decay = exp(-p.gamma * t);
  if (std::holds_alternative<Critical>(regime)) return {decay, decay * t};

  // Signed omega0^2 - gamma^2 in product form.
  const T disc = (p.omega0 - p.gamma) * (p.omega0 + p.gamma);
  const double t2 = t * t;

  if (const auto* u = std::get_if<Underdamped<T>>(&regime)) {
    if (std::abs(value_of(u->omega_d) * t) < kSeriesSwitch) {
      const T x = disc * t2;
      const T c = 1.0 - x * (1.0 / 2.0) + x * x * (1.0 / 24.0);
      const T sn = t * (1.0 - x * (1.0 / 6.0) + x * x * (1.0 / 120.0));
      return {decay * c, decay * sn};
    }
    const T arg = u->omega_d * t;
    return {decay * cos(arg), decay * sin(arg) / u->omega_d};
  }

  const auto& o = std::get<Overdamped<T>>(regime);
  const double st = value_of(o.sigma) * t;
  if (st < kSeriesSwitch) {
    const T x = -disc * t2;  // sigma^2 t^2
    const T c = 1.0 + x * (1.0 / 2.0) + x * x * (1.0 / 24.0);
    const T sn = t * (1.0 + x * (1.0 / 6.0) + x * x * (1.0 / 120.0));
    return {decay * c, decay * sn};
  }
  if (st > kPairedExpSwitch) {
    const T fast = p.gamma + o.sigma;
    const T slow = p.omega0 * p.omega0 / fast;  // gamma - sigma without cancellation
    const T e_slow = exp(-slow * t);
    const T e_fast = exp(-fast * t);
    return {0.5 * (e_slow + e_fast), 0.5 * (e_slow - e_fast) / o.sigma};
  }
  const T arg = o.sigma * t;
  return {decay * cosh(arg), decay * sinh(arg) / o.sigma};
}

template <class T>
Propagator<T> propagator_from_basis(const OscParams<T>& p, const std::pair<T, T>& basis) {
  const auto& [ec, esn] = basis;
  return {ec + p.gamma * esn, esn, -(p.omega0 * p.omega0) * esn, ec - p.gamma * esn};
}

}  // namespace detail

/// Closed-form e^{At} for t >= 0.
template <class T>
Propagator<T> exp_At(const OscParams<T>& p, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw RangeError("exp_At: duration must be finite and >= 0");
  const auto regime = classify_regime(p);
  return detail::propagator_from_basis(p, detail::damped_flow_basis(p, regime, t));
}

/// exp_At(p, dt) * z0.
template <class T>
State2<T> propagate(const State2<T>& z0, const OscParams<T>& p, double dt) {
  return exp_At(p, dt).apply(z0);
}

/// Generic 2x2 matrix exponential exp(A t) by scaling and squaring around a
/// truncated Taylor core. Test oracle only.
Propagator<double> expm_oracle(double a11, double a12, double a21, double a22, double t);

/// Companion matrix of one oscillator channel.
inline std::array<double, 4> oscillator_matrix(const OscParams<double>& p) {
  return {0.0, 1.0, -p.omega0 * p.omega0, -2.0 * p.gamma};
}

}  // namespace osc
