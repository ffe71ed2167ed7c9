#pragma once

// Exponential-trigonometric integrals over a window [0, delta]:
//
//   C(delta, gamma, lambda)  = int_0^delta e^{-gamma s} cos(lambda s) ds
//   S(delta, gamma, lambda)  = int_0^delta e^{-gamma s} sin(lambda s) ds
//   tC, tS                   = the same with an extra factor s
//   I_cc, I_ss, I_sc, I_cs   = products of two trigonometric factors
//
// C + iS = delta * phi1(w) and tC + i tS = delta^2 * psi(w) with
// w = (-gamma + i lambda) delta, phi1(w) = (e^w - 1)/w and
// psi(w) = (e^w (w - 1) + 1)/w^2. For |w| < 1 both are summed from their
// Taylor series, which makes the lambda -> 0, gamma -> 0 and
// lambda1 -> lambda2 limits exact and continuous without special cases.

#include <utility>

#include "oscattn/core.hpp"

namespace osc {

enum class TrigPair { cc, ss, sc, cs };

/// Window length, decay and the frequencies of an I-kernel.
struct KernelArgs {
  double delta = 1.0;
  double gamma = 0.0;
  double lambda1 = 0.0;
  double lambda2 = 0.0;
};

namespace detail {

inline constexpr double kSeriesRadius = 1.0;
inline constexpr int kSeriesTerms = 20;

template <class T>
struct Cx {
  T re, im;
};

template <class T>
Cx<T> cmul(const Cx<T>& a, const Cx<T>& b) {
  return {a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re};
}

/// sum_{k=0}^{K} coef(k) w^k by Horner.
template <class T, class Coef>
Cx<T> complex_series(const Cx<T>& w, Coef coef) {
  Cx<T> acc{T(coef(kSeriesTerms)), T(0.0)};
  for (int k = kSeriesTerms - 1; k >= 0; --k) {
    acc = cmul(acc, w);
    acc.re = acc.re + coef(k);
  }
  return acc;
}

inline double inv_factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return 1.0 / f;
}

}  // namespace detail

/// (C, S) from caller-supplied e^{-gamma delta}, cos(lambda delta) and
/// sin(lambda delta). Lets batched callers share transcendental work across
/// kernels by angle addition.
template <class T>
std::pair<T, T> kernel_CS_trig(double delta, const T& gamma, const T& lambda, const T& decay, const T& cos_ld,
                               const T& sin_ld) {
  const double g = value_of(gamma);
  const double l = value_of(lambda);
  if ((g * g + l * l) * delta * delta < detail::kSeriesRadius) {
    const detail::Cx<T> w{-gamma * delta, lambda * delta};
    const auto phi = detail::complex_series(w, [](int k) { return detail::inv_factorial(k + 1); });
    return {phi.re * delta, phi.im * delta};
  }
  const T ec = decay * cos_ld;
  const T es = decay * sin_ld;
  const T denom = gamma * gamma + lambda * lambda;
  return {(gamma - gamma * ec + lambda * es) / denom, (lambda - gamma * es - lambda * ec) / denom};
}

/// (C, S) evaluated together; both share every transcendental call.
template <class T>
std::pair<T, T> kernel_CS(double delta, const T& gamma, const T& lambda) {
  using std::cos;
  using std::exp;
  using std::sin;
  const double g = value_of(gamma);
  const double l = value_of(lambda);
  if ((g * g + l * l) * delta * delta < detail::kSeriesRadius) {
    const detail::Cx<T> w{-gamma * delta, lambda * delta};
    const auto phi = detail::complex_series(w, [](int k) { return detail::inv_factorial(k + 1); });
    return {phi.re * delta, phi.im * delta};
  }
  const T arg = lambda * delta;
  return kernel_CS_trig(delta, gamma, lambda, T(exp(-gamma * delta)), T(cos(arg)), T(sin(arg)));
}

template <class T>
T kernel_C(double delta, const T& gamma, const T& lambda) {
  return kernel_CS(delta, gamma, lambda).first;
}

template <class T>
T kernel_S(double delta, const T& gamma, const T& lambda) {
  return kernel_CS(delta, gamma, lambda).second;
}

/// (tC, tS) from caller-supplied e^{-gamma delta}, cos and sin of lambda delta.
template <class T>
std::pair<T, T> kernel_tCS_trig(double delta, const T& gamma, const T& lambda, const T& decay, const T& cos_ld,
                                const T& sin_ld) {
  const double g = value_of(gamma);
  const double l = value_of(lambda);
  const double d2 = delta * delta;
  if ((g * g + l * l) * d2 < detail::kSeriesRadius) {
    const detail::Cx<T> w{-gamma * delta, lambda * delta};
    const auto psi = detail::complex_series(w, [](int k) { return detail::inv_factorial(k) / (k + 2); });
    return {psi.re * d2, psi.im * d2};
  }
  // (e^{zD}(zD - 1) + 1) / z^2 with z = -gamma + i lambda, and
  // 1/z^2 = conj(z)^2 / |z|^4.
  const detail::Cx<T> ez{decay * cos_ld, decay * sin_ld};
  const detail::Cx<T> wm1{-gamma * delta - 1.0, lambda * delta};
  auto num = detail::cmul(ez, wm1);
  num.re = num.re + 1.0;
  const T r2 = gamma * gamma + lambda * lambda;
  const detail::Cx<T> zc2{gamma * gamma - lambda * lambda, gamma * lambda * 2.0};
  const auto q = detail::cmul(num, zc2);
  const T r4 = r2 * r2;
  return {q.re / r4, q.im / r4};
}

/// (tC, tS): the window integrals with an extra factor s. Equal to
/// (-dC/dgamma, -dS/dgamma).
template <class T>
std::pair<T, T> kernel_tCS(double delta, const T& gamma, const T& lambda) {
  using std::cos;
  using std::exp;
  using std::sin;
  const double g = value_of(gamma);
  const double l = value_of(lambda);
  if ((g * g + l * l) * delta * delta < detail::kSeriesRadius) {
    return kernel_tCS_trig(delta, gamma, lambda, T(1.0), T(1.0), T(0.0));
  }
  const T arg = lambda * delta;
  return kernel_tCS_trig(delta, gamma, lambda, T(exp(-gamma * delta)), T(cos(arg)), T(sin(arg)));
}

template <class T>
T kernel_tC(double delta, const T& gamma, const T& lambda) {
  return kernel_tCS(delta, gamma, lambda).first;
}

template <class T>
T kernel_tS(double delta, const T& gamma, const T& lambda) {
  return kernel_tCS(delta, gamma, lambda).second;
}

/// All four damped trigonometric product integrals; the first trigonometric
/// factor carries lambda1, the second lambda2.
template <class T>
struct TrigProducts {
  T cc, cs, sc, ss;
};

template <class T>
TrigProducts<T> kernel_I_all(double delta, const T& gamma, const T& lambda1, const T& lambda2) {
  const auto [c_minus, s_minus] = kernel_CS(delta, gamma, T(lambda1 - lambda2));
  const auto [c_plus, s_plus] = kernel_CS(delta, gamma, T(lambda1 + lambda2));
  return {0.5 * (c_minus + c_plus), 0.5 * (s_plus - s_minus), 0.5 * (s_plus + s_minus), 0.5 * (c_minus - c_plus)};
}

template <class T>
T kernel_I(TrigPair kind, double delta, const T& gamma, const T& lambda1, const T& lambda2) {
  const auto all = kernel_I_all(delta, gamma, lambda1, lambda2);
  switch (kind) {
    case TrigPair::cc: return all.cc;
    case TrigPair::ss: return all.ss;
    case TrigPair::sc: return all.sc;
    case TrigPair::cs: return all.cs;
  }
  return all.cc;
}

inline double kernel_I(TrigPair kind, const KernelArgs& a) {
  if (!(a.delta > 0.0) || !(a.gamma >= 0.0)) throw RangeError("kernel_I: require delta > 0 and gamma >= 0");
  return kernel_I(kind, a.delta, a.gamma, a.lambda1, a.lambda2);
}

/// The underdamped particular-solution integrals
///   I1 = int_0^delta e^{-gamma s} sin(wd s) cos(wj s) ds
///   I2 = int_0^delta e^{-gamma s} sin(wd s) sin(wj s) ds
/// through the explicit lambda_{+-} = wd +- wj antiderivatives. Kept as a
/// second derivation to cross-check kernel_I_all.
std::pair<double, double> particular_I1_I2(double delta, double gamma, double omega_d, double omega_j);

}  // namespace osc
