#pragma once

// Averaged attention logits in closed form,
//
//   alpha_i(t) = (1/(t - t_i)) * integral_{t_i}^{t} <q(tau), k_i(tau)> dtau,
//
// assembled per coordinate from the homogeneous/transient free motion, the
// steady-state response and the constant offset, plus the masked softmax
// and the full multi-head layer.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "oscattn/core.hpp"
#include "oscattn/driven.hpp"
#include "oscattn/kernels.hpp"
#include "oscattn/query.hpp"

namespace osc {

// ---------------------------------------------------------------------------
// window tables

/// Frequency-only quantities of one window [t_i, t_i + delta], shared by all
/// coordinates and heads that use the same query and drive grids.
struct WindowTables {
  double delta = 0.0;
  std::vector<double> cos_q, sin_q;  // cos / sin(w_j delta)
  std::vector<double> C0q, S0q;      // integral of cos / sin(w_j s)
  std::vector<double> C0d, S0d;      // the same for drive frequencies
  std::vector<TrigProducts<double>> cross;  // [j * M + m]: query mode j first, drive mode m second

  std::size_t bytes() const {
    return sizeof(double) * (cos_q.size() + sin_q.size() + C0q.size() + S0q.size() + C0d.size() + S0d.size()) +
           sizeof(TrigProducts<double>) * cross.size();
  }
};

WindowTables make_window_tables(const std::vector<double>& qfreqs, const std::vector<double>& dfreqs, double delta);

// ---------------------------------------------------------------------------
// per-coordinate building blocks

/// Free motion from state w written in the regime's basis pair:
///   underdamped  e^{-g s} cos(wd s),  e^{-g s} sin(wd s)
///   critical     e^{-g s},            s e^{-g s}
///   overdamped   e^{-(g - sig) s},    e^{-(g + sig) s}
template <class T>
std::pair<T, T> basis_coeffs(const OscParams<T>& p, const DampingRegime<T>& regime, const State2<T>& w) {
  const T slope = p.gamma * w.x + w.p;
  if (const auto* u = std::get_if<Underdamped<T>>(&regime)) return {w.x, slope / u->omega_d};
  if (std::holds_alternative<Critical>(regime)) return {w.x, slope};
  const T r = slope / std::get<Overdamped<T>>(regime).sigma;
  return {0.5 * (w.x + r), 0.5 * (w.x - r)};
}

namespace detail {

template <class T>
T dc_of(const RotatedQuery<T>& rq, std::size_t c) {
  return rq.dc.empty() ? T(0.0) : rq.dc[c];
}

}  // namespace detail

/// (integral q_c b1, integral q_c b2) over the window for the basis pair of
/// basis_coeffs.
template <class T>
std::pair<T, T> basis_projection(const RotatedQuery<T>& rq, std::size_t c, const OscParams<T>& p,
                                 const DampingRegime<T>& regime, const WindowTables& w) {
  using std::cos;
  using std::exp;
  using std::sin;
  const double delta = w.delta;
  const T dcq = detail::dc_of(rq, c);
  const std::size_t J = rq.freqs.size();
  const T& g = p.gamma;

  if (const auto* u = std::get_if<Underdamped<T>>(&regime)) {
    const T& wd = u->omega_d;
    const T decay = exp(-g * delta);
    const T cd = cos(wd * delta);
    const T sd = sin(wd * delta);
    const auto [C0, S0] = kernel_CS_trig(delta, g, wd, decay, cd, sd);
    T i1 = dcq * C0;
    T i2 = dcq * S0;
    for (std::size_t j = 0; j < J; ++j) {
      const double cq = w.cos_q[j], sq = w.sin_q[j];
      const T wj(rq.freqs[j]);
      const auto [Cp, Sp] = kernel_CS_trig(delta, g, T(wd + wj), decay, T(cd * cq - sd * sq), T(sd * cq + cd * sq));
      const auto [Cm, Sm] = kernel_CS_trig(delta, g, T(wd - wj), decay, T(cd * cq + sd * sq), T(sd * cq - cd * sq));
      const T& a = rq.A_tilde[j][c];
      const T& b = rq.B_tilde[j][c];
      i1 = i1 + 0.5 * (a * (Cm + Cp) + b * (Sp - Sm));
      i2 = i2 + 0.5 * (a * (Sp + Sm) + b * (Cm - Cp));
    }
    return {i1, i2};
  }

  if (std::holds_alternative<Critical>(regime)) {
    const T decay = exp(-g * delta);
    const auto [C0, S0] = kernel_CS_trig(delta, g, T(0.0), decay, T(1.0), T(0.0));
    const auto [tC0, tS0] = kernel_tCS_trig(delta, g, T(0.0), decay, T(1.0), T(0.0));
    (void)S0;
    (void)tS0;
    T i1 = dcq * C0;
    T i2 = dcq * tC0;
    for (std::size_t j = 0; j < J; ++j) {
      const T wj(rq.freqs[j]);
      const T cq(w.cos_q[j]), sq(w.sin_q[j]);
      const auto [C, S] = kernel_CS_trig(delta, g, wj, decay, cq, sq);
      const auto [tC, tS] = kernel_tCS_trig(delta, g, wj, decay, cq, sq);
      const T& a = rq.A_tilde[j][c];
      const T& b = rq.B_tilde[j][c];
      i1 = i1 + a * C + b * S;
      i2 = i2 + a * tC + b * tS;
    }
    return {i1, i2};
  }

  const T& sigma = std::get<Overdamped<T>>(regime).sigma;
  const T fast = g + sigma;
  const T slow = p.omega0 * p.omega0 / fast;
  const T d_slow = exp(-slow * delta);
  const T d_fast = exp(-fast * delta);
  const auto [Cs0, Ss0] = kernel_CS_trig(delta, slow, T(0.0), d_slow, T(1.0), T(0.0));
  const auto [Cf0, Sf0] = kernel_CS_trig(delta, fast, T(0.0), d_fast, T(1.0), T(0.0));
  (void)Ss0;
  (void)Sf0;
  T i1 = dcq * Cs0;
  T i2 = dcq * Cf0;
  for (std::size_t j = 0; j < J; ++j) {
    const T wj(rq.freqs[j]);
    const T cq(w.cos_q[j]), sq(w.sin_q[j]);
    const auto [Cs, Ss] = kernel_CS_trig(delta, slow, wj, d_slow, cq, sq);
    const auto [Cf, Sf] = kernel_CS_trig(delta, fast, wj, d_fast, cq, sq);
    const T& a = rq.A_tilde[j][c];
    const T& b = rq.B_tilde[j][c];
    i1 = i1 + a * Cs + b * Ss;
    i2 = i2 + a * Cf + b * Sf;
  }
  return {i1, i2};
}

/// integral over the window of q_c(s) * sum_m (c_hat_m cos(v_m s) + d_hat_m sin(v_m s)).
template <class T>
T steady_projection(const RotatedQuery<T>& rq, std::size_t c, const std::vector<T>& c_hat,
                    const std::vector<T>& d_hat, const WindowTables& w) {
  const std::size_t M = c_hat.size();
  const std::size_t J = rq.freqs.size();
  const T dcq = detail::dc_of(rq, c);
  T acc(0.0);
  // Fixed order: query modes ascending, then drive modes ascending.
  for (std::size_t m = 0; m < M; ++m) acc = acc + dcq * (c_hat[m] * w.C0d[m] + d_hat[m] * w.S0d[m]);
  for (std::size_t j = 0; j < J; ++j) {
    const T& a = rq.A_tilde[j][c];
    const T& b = rq.B_tilde[j][c];
    for (std::size_t m = 0; m < M; ++m) {
      const auto& k = w.cross[j * M + m];
      acc = acc + a * (c_hat[m] * k.cc + d_hat[m] * k.cs) + b * (c_hat[m] * k.sc + d_hat[m] * k.ss);
    }
  }
  return acc;
}

/// integral of q_c over the window.
template <class T>
T query_integral(const RotatedQuery<T>& rq, std::size_t c, const WindowTables& w) {
  T acc = detail::dc_of(rq, c) * w.delta;
  for (std::size_t j = 0; j < rq.freqs.size(); ++j) {
    acc = acc + rq.A_tilde[j][c] * w.C0q[j] + rq.B_tilde[j][c] * w.S0q[j];
  }
  return acc;
}

// ---------------------------------------------------------------------------
// logits

/// Key trajectory with its per-coordinate steady state solved once.
template <class T = double>
struct PreparedKey {
  std::vector<Channel<T>> channels;
  std::vector<double> drive_freqs;
  double anchor = 0.0;
};

template <class T>
PreparedKey<T> prepare_key(const KeyTrajectory<T>& k) {
  return {prepare_channels(k), k.forcing.freqs, k.anchor};
}

/// Un-normalized window integral of q_c against one key channel.
template <class T>
T channel_integral(const RotatedQuery<T>& rq, std::size_t c, const Channel<T>& ch, const WindowTables& w) {
  const State2<T> free{ch.z0.x - ch.z_ss.x, ch.z0.p - ch.z_ss.p};
  const auto [a1, a2] = basis_coeffs(ch.p, ch.regime, free);
  const auto [i1, i2] = basis_projection(rq, c, ch.p, ch.regime, w);
  return a1 * i1 + a2 * i2 + steady_projection(rq, c, ch.c_hat, ch.d_hat, w) + ch.offset * query_integral(rq, c, w);
}

/// Un-normalized window integral of <q, k> for a prepared key.
template <class T>
T window_integral(const RotatedQuery<T>& rq, const PreparedKey<T>& k, const WindowTables& w) {
  if (rq.dim() != k.channels.size()) throw ShapeError("logit: query and key widths differ");
  T acc(0.0);
  for (std::size_t c = 0; c < k.channels.size(); ++c) acc = acc + channel_integral(rq, c, k.channels[c], w);
  return acc;
}

/// Homogeneous contribution (1/delta) integral <q, k_hom>.
template <class T>
T hom_logit(const RotatedQuery<T>& rq, const KeyTrajectory<T>& k, double t_i, double t_j) {
  if (!(t_j > t_i)) throw WindowError("hom_logit: require t_j > t_i");
  const double delta = t_j - t_i;
  const auto w = make_window_tables(rq.freqs, {}, delta);
  T acc(0.0);
  for (std::size_t c = 0; c < k.dim(); ++c) {
    const auto regime = classify_regime(k.params[c]);
    const auto [a1, a2] = basis_coeffs(k.params[c], regime, k.z0[c]);
    const auto [i1, i2] = basis_projection(rq, c, k.params[c], regime, w);
    acc = acc + a1 * i1 + a2 * i2;
  }
  return acc / delta;
}

/// Driven contribution (1/delta)(I_ss + I_tr) from a rotated steady state and
/// its transient coefficients.
template <class T>
T driven_logit(const RotatedQuery<T>& rq, const std::vector<OscParams<T>>& params, const SteadyState<T>& ss,
               const TransientCoeffs<T>& tc, double delta) {
  if (!(delta > 0.0)) throw WindowError("driven_logit: require delta > 0");
  const auto w = make_window_tables(rq.freqs, ss.freqs, delta);
  T acc(0.0);
  std::vector<T> c_hat(ss.freqs.size()), d_hat(ss.freqs.size());
  for (std::size_t c = 0; c < params.size(); ++c) {
    const auto regime = classify_regime(params[c]);
    const auto [i1, i2] = basis_projection(rq, c, params[c], regime, w);
    for (std::size_t m = 0; m < ss.freqs.size(); ++m) {
      c_hat[m] = ss.C_hat[m][c];
      d_hat[m] = ss.D_hat[m][c];
    }
    acc = acc + tc.first[c] * i1 + tc.second[c] * i2 + steady_projection(rq, c, c_hat, d_hat, w);
  }
  return acc / delta;
}

template <class T>
T dot(const std::vector<T>& a, const std::vector<T>& b) {
  T acc(0.0);
  for (std::size_t c = 0; c < a.size(); ++c) acc = acc + a[c] * b[c];
  return acc;
}

/// Complete logit alpha_i(t_j); at t_j = anchor the pointwise <q, k>.
template <class T>
T attention_logit(const QueryExpansion<T>& q, const PreparedKey<T>& k, double t_j) {
  if (!(t_j >= k.anchor)) throw CausalityError("attention_logit: t_j precedes the key anchor");
  if (t_j == k.anchor) {
    const auto qv = eval_query(q, t_j);
    T acc(0.0);
    for (std::size_t c = 0; c < k.channels.size(); ++c) acc = acc + qv[c] * (k.channels[c].z0.x + k.channels[c].offset);
    return acc;
  }
  const double delta = t_j - k.anchor;
  const auto rq = rotate_query(q, k.anchor);
  const auto w = make_window_tables(rq.freqs, k.drive_freqs, delta);
  return window_integral(rq, k, w) / delta;
}

template <class T>
T attention_logit(const QueryExpansion<T>& q, const KeyTrajectory<T>& k, double t_j) {
  return attention_logit(q, prepare_key(k), t_j);
}

/// Time average of a value trajectory over [anchor, t_j]; v(anchor) when
/// t_j equals the anchor.
template <class T>
std::vector<T> mean_value(const PreparedKey<T>& v, double t_j, const WindowTables* tables = nullptr) {
  if (!(t_j >= v.anchor)) throw CausalityError("mean_value: t_j precedes the anchor");
  const std::size_t d = v.channels.size();
  std::vector<T> out(d);
  if (t_j == v.anchor) {
    for (std::size_t c = 0; c < d; ++c) out[c] = v.channels[c].z0.x + v.channels[c].offset;
    return out;
  }
  const double delta = t_j - v.anchor;
  WindowTables local;
  if (!tables) {
    local = make_window_tables({}, v.drive_freqs, delta);
    tables = &local;
  }
  RotatedQuery<T> unit;
  unit.dc.assign(d, T(1.0));
  unit.anchor = v.anchor;
  for (std::size_t c = 0; c < d; ++c) {
    const auto& ch = v.channels[c];
    const State2<T> free{ch.z0.x - ch.z_ss.x, ch.z0.p - ch.z_ss.p};
    const auto [a1, a2] = basis_coeffs(ch.p, ch.regime, free);
    const auto [i1, i2] = basis_projection(unit, c, ch.p, ch.regime, *tables);
    out[c] = (a1 * i1 + a2 * i2 + steady_projection(unit, c, ch.c_hat, ch.d_hat, *tables)) / delta + ch.offset;
  }
  return out;
}

template <class T>
std::vector<T> mean_value(const KeyTrajectory<T>& v, double t_i, double t_j) {
  if (t_i != v.anchor) throw CausalityError("mean_value: window must start at the anchor");
  return mean_value(prepare_key(v), t_j);
}

// ---------------------------------------------------------------------------
// softmax

/// softmax(logits / sqrt(d_k)) over valid entries; invalid entries get 0.
std::vector<double> masked_softmax(std::span<const double> logits, double d_k, const std::vector<bool>& valid);

// ---------------------------------------------------------------------------
// layer

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
  std::span<const double> row(std::size_t i) const { return {a.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {a.data() + i * cols, cols}; }
};

/// Spectra, velocity maps and drive gains of one head.
struct HeadParams {
  std::vector<double> omega_k, zeta_k, omega_v, zeta_v;  // d_h each; gamma = zeta * omega
  Matrix U_k, U_v;                                      // d_h x d_h
  std::vector<std::vector<double>> g_k, h_k, g_v, h_v;  // [m][c]
};

struct LayerParams {
  std::size_t d = 0, heads = 1;
  Matrix W_Q, W_K, W_V, W_O;  // d x d, y = W x + b
  std::vector<double> b_Q, b_K, b_V;
  std::vector<double> ln_gain, ln_bias;
  std::vector<HeadParams> head;
  FrequencyGrid grid;  // query basis and drive frequencies
  double ridge = kDefaultRidge;

  std::size_t d_head() const { return d / heads; }
};

void validate(const LayerParams& p);

/// Defaults: weights U(-1/sqrt(d), 1/sqrt(d)), zero biases, omega log-uniform
/// on [1e-2, 1e1], zeta uniform on [0.05, 0.4], zero velocity maps, drive
/// gains U(-gain, gain), query grid default_grid(n_max, J).
LayerParams init_layer_params(std::size_t d, std::size_t heads, std::size_t n_max, Rng& rng, std::size_t J = 8,
                              double gain = 0.5);

struct AttentionResult {
  Matrix logits;   // [row j = output instant][col i = key]; -inf where i > j
  Matrix weights;  // row-stochastic over i <= j
  Matrix outputs;  // N x d_h
};

/// Optional instrumentation filled by layer_forward.
struct LayerTrace {
  std::vector<AttentionResult> heads;
  std::size_t peak_scratch_bytes = 0;
};

/// Per-head key and value trajectories of token i, anchored at t_i.
KeyTrajectory<double> head_trajectory(std::span<const double> proj, const std::vector<double>& omega,
                                      const std::vector<double>& zeta, const Matrix& U,
                                      const std::vector<std::vector<double>>& g,
                                      const std::vector<std::vector<double>>& h, const std::vector<double>& drive,
                                      double anchor);

/// Q/K/V projection of all tokens: rows are tokens, width d.
Matrix project(const Matrix& x, const Matrix& W, const std::vector<double>& b);

/// x + W_O y followed by per-token layer normalization.
Matrix residual_layer_norm(const Matrix& x, const Matrix& y, const LayerParams& p);

inline constexpr double kLayerNormEps = 1e-5;

Matrix layer_forward(const Matrix& tokens, const TimeGrid& grid, const LayerParams& params,
                     LayerTrace* trace = nullptr);

}  // namespace osc
