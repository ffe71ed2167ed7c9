#pragma once

// Driven key/value trajectories. Each coordinate c of a token's key is an
// oscillator anchored at t_i:
//
//   x_c(t) = hom(t) + steady(t) + transient(t) + offset_c
//
// where steady(t) is the sinusoidal response to the forcing harmonics and
// the transient is the free motion that cancels steady(t_i) and its
// derivative, so the particular part starts at rest.

#include <cmath>
#include <cstddef>
#include <vector>

#include "oscattn/core.hpp"
#include "oscattn/propagator.hpp"

namespace osc {

/// F_c(t) = sum_m P[m][c] cos(freqs[m] t) + Q[m][c] sin(freqs[m] t), t absolute.
template <class T = double>
struct ForcingExpansion {
  std::vector<double> freqs;
  std::vector<std::vector<T>> P;
  std::vector<std::vector<T>> Q;

  std::size_t modes() const { return freqs.size(); }
};

template <class T = double>
struct SteadyState {
  std::vector<double> freqs;
  std::vector<std::vector<T>> C, D;          // absolute-time coefficients
  std::vector<std::vector<T>> C_hat, D_hat;  // in local time s = t - anchor
  double anchor = 0.0;
};

enum class RegimeKind { underdamped, critical, overdamped };

/// Per coordinate: (E, F) for underdamped and critical, (U, V) for overdamped.
template <class T = double>
struct TransientCoeffs {
  std::vector<RegimeKind> kind;
  std::vector<T> first;
  std::vector<T> second;
};

template <class T = double>
struct KeyTrajectory {
  std::vector<OscParams<T>> params;
  std::vector<State2<T>> z0;
  ForcingExpansion<T> forcing;
  std::vector<T> offset;  // empty means zero
  double anchor = 0.0;

  std::size_t dim() const { return params.size(); }
};

template <class T = double>
struct TrajectoryPoint {
  std::vector<T> x;
  std::vector<T> v;
};

inline constexpr double kResonanceRelTol = 1e-20;

template <class T>
RegimeKind regime_kind(const DampingRegime<T>& r) {
  if (std::holds_alternative<Underdamped<T>>(r)) return RegimeKind::underdamped;
  if (std::holds_alternative<Critical>(r)) return RegimeKind::critical;
  return RegimeKind::overdamped;
}

/// One mode of the Cramer solve:
///   (w0^2 - v^2) C + 2 g v D = P
///  -2 g v C + (w0^2 - v^2) D = Q
template <class T>
std::pair<T, T> steady_mode(const OscParams<T>& p, double varpi, const T& P, const T& Q) {
  const T a = p.omega0 * p.omega0 - varpi * varpi;
  const T b = 2.0 * varpi * p.gamma;
  const T det = a * a + b * b;
  const double w2 = value_of(p.omega0) * value_of(p.omega0);
  const double scale = std::max(w2 * w2, varpi * varpi * varpi * varpi);
  if (!(value_of(det) > kResonanceRelTol * scale)) {
    throw ResonanceError("undamped resonance: drive frequency " + std::to_string(varpi) +
                         " coincides with omega0; perturb gamma or the drive");
  }
  return {(a * P - b * Q) / det, (b * P + a * Q) / det};
}

template <class T>
void validate_forcing(const ForcingExpansion<T>& f, std::size_t dim) {
  if (f.P.size() != f.modes() || f.Q.size() != f.modes()) throw ShapeError("forcing: P/Q mode count mismatch");
  for (std::size_t m = 0; m < f.modes(); ++m) {
    if (!(f.freqs[m] > 0.0) || !std::isfinite(f.freqs[m])) throw ParameterError("forcing: frequencies must be > 0");
    if (f.P[m].size() != dim || f.Q[m].size() != dim) throw ShapeError("forcing: amplitude width mismatch");
    for (std::size_t c = 0; c < dim; ++c) {
      if (!is_finite(f.P[m][c]) || !is_finite(f.Q[m][c])) throw ParameterError("forcing: non-finite amplitude");
    }
  }
}

/// Rotate absolute-time coefficients into the frame s = t - anchor.
template <class T>
void rotate_steady_state(SteadyState<T>& ss, double anchor) {
  ss.anchor = anchor;
  ss.C_hat.resize(ss.C.size());
  ss.D_hat.resize(ss.D.size());
  for (std::size_t m = 0; m < ss.freqs.size(); ++m) {
    const double cs = std::cos(ss.freqs[m] * anchor);
    const double sn = std::sin(ss.freqs[m] * anchor);
    const std::size_t d = ss.C[m].size();
    ss.C_hat[m].resize(d);
    ss.D_hat[m].resize(d);
    for (std::size_t c = 0; c < d; ++c) {
      ss.C_hat[m][c] = ss.C[m][c] * cs + ss.D[m][c] * sn;
      ss.D_hat[m][c] = ss.D[m][c] * cs - ss.C[m][c] * sn;
    }
  }
}

/// Steady-state coefficients for every mode and coordinate; rotated fields
/// are filled for the given anchor.
template <class T>
SteadyState<T> steady_state(const std::vector<OscParams<T>>& params, const ForcingExpansion<T>& f,
                            double anchor = 0.0) {
  validate_forcing(f, params.size());
  SteadyState<T> ss;
  ss.freqs = f.freqs;
  ss.C.assign(f.modes(), std::vector<T>(params.size()));
  ss.D.assign(f.modes(), std::vector<T>(params.size()));
  for (std::size_t c = 0; c < params.size(); ++c) {
    validate(params[c]);
    for (std::size_t m = 0; m < f.modes(); ++m) {
      const auto [cm, dm] = steady_mode(params[c], f.freqs[m], f.P[m][c], f.Q[m][c]);
      ss.C[m][c] = cm;
      ss.D[m][c] = dm;
    }
  }
  rotate_steady_state(ss, anchor);
  return ss;
}

/// (x_ss, x_ss') of coordinate c at the anchor of a rotated steady state.
template <class T>
State2<T> steady_at_anchor(const SteadyState<T>& ss, std::size_t c) {
  State2<T> z{T(0.0), T(0.0)};
  for (std::size_t m = 0; m < ss.freqs.size(); ++m) {
    z.x = z.x + ss.C_hat[m][c];
    z.p = z.p + ss.freqs[m] * ss.D_hat[m][c];
  }
  return z;
}

/// Regime-matched coefficients of the transient that cancels the steady
/// state's position and velocity at the anchor.
template <class T>
TransientCoeffs<T> transient_coeffs(const std::vector<OscParams<T>>& params, SteadyState<T> ss, double anchor) {
  if (ss.anchor != anchor || ss.C_hat.size() != ss.C.size()) rotate_steady_state(ss, anchor);
  TransientCoeffs<T> tc;
  for (std::size_t c = 0; c < params.size(); ++c) {
    const auto& p = params[c];
    const auto regime = classify_regime(p);
    const auto z = steady_at_anchor(ss, c);
    tc.kind.push_back(regime_kind(regime));
    if (const auto* u = std::get_if<Underdamped<T>>(&regime)) {
      tc.first.push_back(-z.x);
      tc.second.push_back((-(p.gamma * z.x) - z.p) / u->omega_d);
    } else if (std::holds_alternative<Critical>(regime)) {
      tc.first.push_back(-z.x);
      tc.second.push_back(-(p.gamma * z.x) - z.p);
    } else {
      const T sigma = std::get<Overdamped<T>>(regime).sigma;
      tc.first.push_back((-((p.gamma + sigma) * z.x) - z.p) / (2.0 * sigma));
      tc.second.push_back(((p.gamma - sigma) * z.x + z.p) / (2.0 * sigma));
    }
  }
  return tc;
}

/// Everything needed to evaluate or integrate one coordinate of a trajectory.
template <class T = double>
struct Channel {
  OscParams<T> p;
  DampingRegime<T> regime;
  State2<T> z0;       // homogeneous initial state
  State2<T> z_ss;     // steady state at the anchor
  std::vector<T> c_hat, d_hat;
  T offset{};
};

template <class T>
std::vector<Channel<T>> prepare_channels(const KeyTrajectory<T>& k) {
  const std::size_t d = k.dim();
  if (k.z0.size() != d) throw ShapeError("trajectory: z0 width mismatch");
  if (!k.offset.empty() && k.offset.size() != d) throw ShapeError("trajectory: offset width mismatch");
  const auto ss = steady_state(k.params, k.forcing, k.anchor);
  std::vector<Channel<T>> out;
  out.reserve(d);
  for (std::size_t c = 0; c < d; ++c) {
    Channel<T> ch{k.params[c], classify_regime(k.params[c]), k.z0[c], steady_at_anchor(ss, c), {}, {},
                  k.offset.empty() ? T(0.0) : k.offset[c]};
    ch.c_hat.resize(ss.freqs.size());
    ch.d_hat.resize(ss.freqs.size());
    for (std::size_t m = 0; m < ss.freqs.size(); ++m) {
      ch.c_hat[m] = ss.C_hat[m][c];
      ch.d_hat[m] = ss.D_hat[m][c];
    }
    out.push_back(std::move(ch));
  }
  return out;
}

/// Position and velocity of one channel at local time s >= 0.
template <class T>
State2<T> eval_channel(const Channel<T>& ch, const std::vector<double>& freqs, double s) {
  // Homogeneous and transient parts are both free motion, from z0 and -z_ss.
  const State2<T> w{ch.z0.x - ch.z_ss.x, ch.z0.p - ch.z_ss.p};
  const auto flow = detail::propagator_from_basis(ch.p, detail::damped_flow_basis(ch.p, ch.regime, s));
  State2<T> z = flow.apply(w);
  for (std::size_t m = 0; m < freqs.size(); ++m) {
    const double cs = std::cos(freqs[m] * s);
    const double sn = std::sin(freqs[m] * s);
    z.x = z.x + ch.c_hat[m] * cs + ch.d_hat[m] * sn;
    z.p = z.p + freqs[m] * (ch.d_hat[m] * cs - ch.c_hat[m] * sn);
  }
  z.x = z.x + ch.offset;
  return z;
}

template <class T>
TrajectoryPoint<T> eval_trajectory(const KeyTrajectory<T>& k, double t) {
  if (!(t >= k.anchor)) throw CausalityError("eval_trajectory: t precedes the anchor");
  const auto channels = prepare_channels(k);
  TrajectoryPoint<T> out;
  out.x.reserve(k.dim());
  out.v.reserve(k.dim());
  for (const auto& ch : channels) {
    const auto z = eval_channel(ch, k.forcing.freqs, t - k.anchor);
    out.x.push_back(z.x);
    out.v.push_back(z.p);
  }
  return out;
}

/// Particular part only (steady + transient) of one channel; starts at rest.
template <class T>
State2<T> eval_particular(const Channel<T>& ch, const std::vector<double>& freqs, double s) {
  Channel<T> c = ch;
  c.z0 = {T(0.0), T(0.0)};
  c.offset = T(0.0);
  return eval_channel(c, freqs, s);
}

/// Forcing F_c(t) in absolute time.
template <class T>
T eval_forcing(const ForcingExpansion<T>& f, std::size_t c, double t) {
  T acc(0.0);
  for (std::size_t m = 0; m < f.modes(); ++m) {
    acc = acc + f.P[m][c] * std::cos(f.freqs[m] * t) + f.Q[m][c] * std::sin(f.freqs[m] * t);
  }
  return acc;
}

/// Build an absolute-time expansion from a drive written relative to the
/// anchor: sum_m g[m] cos(v_m (t - t_i)) + h[m] sin(v_m (t - t_i)).
template <class T>
ForcingExpansion<T> anchored_drive(const std::vector<double>& freqs, const std::vector<std::vector<T>>& g,
                                   const std::vector<std::vector<T>>& h, double anchor) {
  ForcingExpansion<T> f;
  f.freqs = freqs;
  f.P.resize(freqs.size());
  f.Q.resize(freqs.size());
  for (std::size_t m = 0; m < freqs.size(); ++m) {
    const double cs = std::cos(freqs[m] * anchor);
    const double sn = std::sin(freqs[m] * anchor);
    const std::size_t d = g[m].size();
    f.P[m].resize(d);
    f.Q[m].resize(d);
    for (std::size_t c = 0; c < d; ++c) {
      f.P[m][c] = g[m][c] * cs - h[m][c] * sn;
      f.Q[m][c] = g[m][c] * sn + h[m][c] * cs;
    }
  }
  return f;
}

}  // namespace osc
