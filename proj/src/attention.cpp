#include "oscattn/attention.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace osc {

WindowTables make_window_tables(const std::vector<double>& qfreqs, const std::vector<double>& dfreqs, double delta) {
  WindowTables w;
  w.delta = delta;
  const std::size_t J = qfreqs.size(), M = dfreqs.size();
  w.cos_q.resize(J);
  w.sin_q.resize(J);
  w.C0q.resize(J);
  w.S0q.resize(J);
  for (std::size_t j = 0; j < J; ++j) {
    w.cos_q[j] = std::cos(qfreqs[j] * delta);
    w.sin_q[j] = std::sin(qfreqs[j] * delta);
    std::tie(w.C0q[j], w.S0q[j]) = kernel_CS_trig(delta, 0.0, qfreqs[j], 1.0, w.cos_q[j], w.sin_q[j]);
  }
  std::vector<double> cos_d(M), sin_d(M);
  w.C0d.resize(M);
  w.S0d.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    cos_d[m] = std::cos(dfreqs[m] * delta);
    sin_d[m] = std::sin(dfreqs[m] * delta);
    std::tie(w.C0d[m], w.S0d[m]) = kernel_CS_trig(delta, 0.0, dfreqs[m], 1.0, cos_d[m], sin_d[m]);
  }
  w.cross.resize(J * M);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t m = 0; m < M; ++m) {
      const double cq = w.cos_q[j], sq = w.sin_q[j], cd = cos_d[m], sd = sin_d[m];
      const auto [Cm, Sm] = kernel_CS_trig(delta, 0.0, qfreqs[j] - dfreqs[m], 1.0, cq * cd + sq * sd, sq * cd - cq * sd);
      const auto [Cp, Sp] = kernel_CS_trig(delta, 0.0, qfreqs[j] + dfreqs[m], 1.0, cq * cd - sq * sd, sq * cd + cq * sd);
      w.cross[j * M + m] = {0.5 * (Cm + Cp), 0.5 * (Sp - Sm), 0.5 * (Sp + Sm), 0.5 * (Cm - Cp)};
    }
  }
  return w;
}

std::vector<double> masked_softmax(std::span<const double> logits, double d_k, const std::vector<bool>& valid) {
  if (valid.size() != logits.size()) throw ShapeError("masked_softmax: mask length mismatch");
  if (!(d_k > 0.0)) throw RangeError("masked_softmax: d_k must be positive");
  const double scale = 1.0 / std::sqrt(d_k);
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!valid[i]) continue;
    any = true;
    mx = std::max(mx, logits[i] * scale);
  }
  if (!any) throw MaskError("masked_softmax: no valid entries");
  std::vector<double> w(logits.size(), 0.0);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!valid[i]) continue;
    w[i] = std::exp(logits[i] * scale - mx);
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

void validate(const LayerParams& p) {
  if (p.heads == 0 || p.d == 0 || p.d % p.heads != 0) throw ShapeError("layer: d must be a positive multiple of heads");
  const std::size_t d = p.d, dh = p.d_head(), M = p.grid.size();
  auto square_of = [&](const Matrix& m, std::size_t n, const char* what) {
    if (m.rows != n || m.cols != n) throw ShapeError(std::string("layer: bad shape for ") + what);
  };
  square_of(p.W_Q, d, "W_Q");
  square_of(p.W_K, d, "W_K");
  square_of(p.W_V, d, "W_V");
  square_of(p.W_O, d, "W_O");
  for (const auto* b : {&p.b_Q, &p.b_K, &p.b_V, &p.ln_gain, &p.ln_bias}) {
    if (b->size() != d) throw ShapeError("layer: bias/gain width mismatch");
  }
  if (p.head.size() != p.heads) throw ShapeError("layer: one HeadParams per head required");
  validate(p.grid);
  for (const auto& h : p.head) {
    for (const auto* v : {&h.omega_k, &h.zeta_k, &h.omega_v, &h.zeta_v}) {
      if (v->size() != dh) throw ShapeError("layer: spectrum width mismatch");
    }
    for (std::size_t c = 0; c < dh; ++c) {
      if (!(h.omega_k[c] > 0.0) || !(h.omega_v[c] > 0.0)) throw ParameterError("layer: omega must be > 0");
      if (!(h.zeta_k[c] >= 0.0) || !(h.zeta_v[c] >= 0.0)) throw ParameterError("layer: zeta must be >= 0");
    }
    square_of(h.U_k, dh, "U_k");
    square_of(h.U_v, dh, "U_v");
    for (const auto* g : {&h.g_k, &h.h_k, &h.g_v, &h.h_v}) {
      if (g->size() != M) throw ShapeError("layer: one gain vector per drive mode required");
      for (const auto& row : *g) {
        if (row.size() != dh) throw ShapeError("layer: gain width mismatch");
      }
    }
  }
}

LayerParams init_layer_params(std::size_t d, std::size_t heads, std::size_t n_max, Rng& rng, std::size_t J,
                              double gain) {
  if (heads == 0 || d % heads != 0) throw ShapeError("init_layer_params: d must be a multiple of heads");
  LayerParams p;
  p.d = d;
  p.heads = heads;
  p.grid = default_grid(n_max, J);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d));
  for (Matrix* W : {&p.W_Q, &p.W_K, &p.W_V, &p.W_O}) {
    *W = Matrix(d, d);
    for (double& x : W->a) x = rng.uniform(-bound, bound);
  }
  p.b_Q.assign(d, 0.0);
  p.b_K.assign(d, 0.0);
  p.b_V.assign(d, 0.0);
  p.ln_gain.assign(d, 1.0);
  p.ln_bias.assign(d, 0.0);
  const std::size_t dh = d / heads;
  auto log_uniform = [&] { return std::exp(rng.uniform(std::log(1e-2), std::log(1e1))); };
  auto gains = [&] {
    std::vector<std::vector<double>> g(J, std::vector<double>(dh));
    for (auto& row : g)
      for (double& x : row) x = gain > 0.0 ? rng.uniform(-gain, gain) : 0.0;
    return g;
  };
  for (std::size_t h = 0; h < heads; ++h) {
    HeadParams hp;
    for (std::size_t c = 0; c < dh; ++c) {
      hp.omega_k.push_back(log_uniform());
      hp.zeta_k.push_back(rng.uniform(0.05, 0.4));
      hp.omega_v.push_back(log_uniform());
      hp.zeta_v.push_back(rng.uniform(0.05, 0.4));
    }
    hp.U_k = Matrix(dh, dh);
    hp.U_v = Matrix(dh, dh);
    hp.g_k = gains();
    hp.h_k = gains();
    hp.g_v = gains();
    hp.h_v = gains();
    p.head.push_back(std::move(hp));
  }
  return p;
}

KeyTrajectory<double> head_trajectory(std::span<const double> proj, const std::vector<double>& omega,
                                      const std::vector<double>& zeta, const Matrix& U,
                                      const std::vector<std::vector<double>>& g,
                                      const std::vector<std::vector<double>>& h, const std::vector<double>& drive,
                                      double anchor) {
  const std::size_t dh = proj.size();
  KeyTrajectory<double> k;
  k.anchor = anchor;
  k.params.resize(dh);
  k.z0.resize(dh);
  for (std::size_t c = 0; c < dh; ++c) {
    k.params[c] = {zeta[c] * omega[c], omega[c]};
    double v = 0.0;
    for (std::size_t e = 0; e < dh; ++e) v += U(c, e) * proj[e];
    k.z0[c] = {proj[c], v};
  }
  std::vector<std::vector<double>> gk(drive.size(), std::vector<double>(dh)), hk = gk;
  for (std::size_t m = 0; m < drive.size(); ++m) {
    for (std::size_t c = 0; c < dh; ++c) {
      gk[m][c] = g[m][c] * proj[c];
      hk[m][c] = h[m][c] * proj[c];
    }
  }
  k.forcing = anchored_drive(drive, gk, hk, anchor);
  return k;
}

Matrix project(const Matrix& x, const Matrix& W, const std::vector<double>& b) {
  Matrix y(x.rows, W.rows);
  for (std::size_t i = 0; i < x.rows; ++i) {
    for (std::size_t r = 0; r < W.rows; ++r) {
      double acc = b[r];
      for (std::size_t c = 0; c < W.cols; ++c) acc += W(r, c) * x(i, c);
      y(i, r) = acc;
    }
  }
  return y;
}

Matrix residual_layer_norm(const Matrix& x, const Matrix& y, const LayerParams& p) {
  const std::size_t d = p.d;
  Matrix out(x.rows, d);
  Matrix z = project(y, p.W_O, std::vector<double>(d, 0.0));
  for (std::size_t i = 0; i < x.rows; ++i) {
    double mean = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      z(i, c) += x(i, c);
      mean += z(i, c);
    }
    mean /= d;
    double var = 0.0;
    for (std::size_t c = 0; c < d; ++c) var += square(z(i, c) - mean);
    var /= d;
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < d; ++c) out(i, c) = p.ln_gain[c] * (z(i, c) - mean) * inv + p.ln_bias[c];
  }
  return out;
}

Matrix layer_forward(const Matrix& tokens, const TimeGrid& grid, const LayerParams& params, LayerTrace* trace) {
  validate(params);
  const std::size_t N = tokens.rows, d = params.d, H = params.heads, dh = params.d_head();
  if (N == 0) throw ShapeError("layer_forward: no tokens");
  if (tokens.cols != d) throw ShapeError("layer_forward: token width mismatch");
  if (grid.size() != N) throw ShapeError("layer_forward: one instant per token required");
  const auto& t = grid.times;

  const Matrix Q = project(tokens, params.W_Q, params.b_Q);
  const Matrix K = project(tokens, params.W_K, params.b_K);
  const Matrix V = project(tokens, params.W_V, params.b_V);

  // Causal query fits: the hat for row j uses instants 0..j and is shared by heads.
  std::vector<QueryHat> hats;
  hats.reserve(N);
  for (std::size_t j = 0; j < N; ++j) {
    hats.push_back(make_query_hat(std::span<const double>(t.data(), j + 1), params.grid, params.ridge));
  }

  const auto& drive = params.grid.freqs;
  Matrix y(N, d);
  if (trace) {
    trace->heads.clear();
    trace->peak_scratch_bytes = 0;
  }
  const double ninf = -std::numeric_limits<double>::infinity();

  for (std::size_t h = 0; h < H; ++h) {
    const auto& hp = params.head[h];
    const std::size_t off = h * dh;
    std::vector<PreparedKey<double>> keys, values;
    keys.reserve(N);
    values.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
      keys.push_back(prepare_key(head_trajectory(K.row(i).subspan(off, dh), hp.omega_k, hp.zeta_k, hp.U_k, hp.g_k,
                                                 hp.h_k, drive, t[i])));
      values.push_back(prepare_key(head_trajectory(V.row(i).subspan(off, dh), hp.omega_v, hp.zeta_v, hp.U_v, hp.g_v,
                                                   hp.h_v, drive, t[i])));
    }

    AttentionResult res{Matrix(N, N, ninf), Matrix(N, N), Matrix(N, dh)};
    for (std::size_t j = 0; j < N; ++j) {
      std::vector<std::vector<double>> samples(j + 1);
      for (std::size_t l = 0; l <= j; ++l) {
        const auto r = Q.row(l).subspan(off, dh);
        samples[l].assign(r.begin(), r.end());
      }
      const auto q = apply_query_hat(hats[j], samples);

      std::vector<double> row(N, ninf);
      std::vector<bool> valid(N, false);
      std::vector<std::vector<double>> vbar(j + 1);
      for (std::size_t i = 0; i <= j; ++i) {
        valid[i] = true;
        if (i == j) {
          row[i] = attention_logit(q, keys[i], t[j]);
          vbar[i] = mean_value(values[i], t[j]);
          continue;
        }
        const double delta = t[j] - t[i];
        const auto rq = rotate_query(q, t[i]);
        const auto w = make_window_tables(rq.freqs, drive, delta);
        row[i] = window_integral(rq, keys[i], w) / delta;
        vbar[i] = mean_value(values[i], t[j], &w);
        if (trace) trace->peak_scratch_bytes = std::max(trace->peak_scratch_bytes, w.bytes());
      }
      const auto wts = masked_softmax(row, static_cast<double>(dh), valid);
      for (std::size_t i = 0; i < N; ++i) {
        res.logits(j, i) = row[i];
        res.weights(j, i) = wts[i];
      }
      for (std::size_t i = 0; i <= j; ++i) {
        for (std::size_t c = 0; c < dh; ++c) res.outputs(j, c) += wts[i] * vbar[i][c];
      }
      for (std::size_t c = 0; c < dh; ++c) y(j, off + c) = res.outputs(j, c);
    }
    if (trace) trace->heads.push_back(std::move(res));
  }
  return residual_layer_norm(tokens, y, params);
}

}  // namespace osc
