#include "oscattn/oracles.hpp"

#include <cmath>
#include <limits>

namespace osc {

DenseTanhField random_dense_field(std::size_t width, Rng& rng, double scale) {
  DenseTanhField f{Matrix(width, width), std::vector<double>(width)};
  const double a = scale / std::sqrt(static_cast<double>(width));
  for (double& w : f.W.a) w = rng.uniform(-a, a);
  for (double& b : f.b) b = rng.uniform(-a, a);
  return f;
}

BaselineField random_dense_baseline(const LayerParams& params, Rng& rng, double scale) {
  BaselineField f;
  f.kind = BaselineField::Kind::dense_tanh;
  for (std::size_t h = 0; h < params.heads; ++h) {
    f.key.push_back(random_dense_field(params.d_head(), rng, scale));
    f.value.push_back(random_dense_field(params.d_head(), rng, scale));
  }
  return f;
}

OdeSystem oscillator_system(const KeyTrajectory<double>& k) {
  const std::size_t d = k.dim();
  OdeSystem sys;
  sys.dim = static_cast<int>(2 * d);
  sys.rhs = [k, d, trig = std::vector<double>(2 * k.forcing.modes())](double t, std::span<const double> z,
                                                                       std::span<double> dz) mutable {
    const std::size_t M = k.forcing.modes();
    for (std::size_t m = 0; m < M; ++m) {
      trig[2 * m] = std::cos(k.forcing.freqs[m] * t);
      trig[2 * m + 1] = std::sin(k.forcing.freqs[m] * t);
    }
    for (std::size_t c = 0; c < d; ++c) {
      double f = 0.0;
      for (std::size_t m = 0; m < M; ++m) f += k.forcing.P[m][c] * trig[2 * m] + k.forcing.Q[m][c] * trig[2 * m + 1];
      const auto& p = k.params[c];
      dz[2 * c] = z[2 * c + 1];
      dz[2 * c + 1] = f - 2.0 * p.gamma * z[2 * c + 1] - p.omega0 * p.omega0 * z[2 * c];
    }
  };
  return sys;
}

namespace {

OdeSystem dense_system(const DenseTanhField& f) {
  const std::size_t d = f.b.size();
  OdeSystem sys;
  sys.dim = static_cast<int>(d);
  sys.rhs = [&f, d](double, std::span<const double> z, std::span<double> dz) {
    for (std::size_t r = 0; r < d; ++r) {
      double acc = f.b[r];
      const double* w = &f.W.a[r * d];
      for (std::size_t c = 0; c < d; ++c) acc += w[c] * z[c];
      dz[r] = std::tanh(acc);
    }
  };
  return sys;
}

struct PairSolver {
  const OdeSystem* sys;
  std::vector<double> z0;
  std::size_t stride;  // state entries per coordinate
};

/// Integrates one pair and returns the path; position of coordinate c at node
/// n is path[n * dim + c * stride].
std::vector<double> solve_path(const PairSolver& ps, double t0, double t1, int S, PathProbe* probe) {
  std::vector<double> path;
  path.reserve(static_cast<std::size_t>(S + 1) * ps.z0.size());
  if (probe) {
    probe->path_allocations += 1;
    probe->peak_path_bytes = std::max(probe->peak_path_bytes, path.capacity() * sizeof(double));
    probe->rhs_evaluations += 4 * static_cast<std::size_t>(S);
  }
  rk4_integrate(*ps.sys, ps.z0, t0, t1, S, &path);
  return path;
}

}  // namespace

Matrix numerical_attention_layer(const Matrix& tokens, const TimeGrid& grid, const LayerParams& params, int S,
                                 const BaselineField& field, NumericTrace* trace) {
  validate(params);
  if (S < 2) throw RangeError("numerical_attention_layer: S must be >= 2");
  const std::size_t N = tokens.rows, d = params.d, H = params.heads, dh = params.d_head();
  if (N == 0) throw ShapeError("numerical_attention_layer: no tokens");
  if (tokens.cols != d) throw ShapeError("numerical_attention_layer: token width mismatch");
  if (grid.size() != N) throw ShapeError("numerical_attention_layer: one instant per token required");
  const bool dense = field.kind == BaselineField::Kind::dense_tanh;
  if (dense && (field.key.size() != H || field.value.size() != H)) {
    throw ShapeError("numerical_attention_layer: one dense field per head required");
  }
  const auto& t = grid.times;

  const Matrix Q = project(tokens, params.W_Q, params.b_Q);
  const Matrix K = project(tokens, params.W_K, params.b_K);
  const Matrix V = project(tokens, params.W_V, params.b_V);
  const auto& drive = params.grid.freqs;
  PathProbe* probe = trace ? &trace->probe : nullptr;
  if (trace) {
    trace->heads.clear();
    trace->probe = {};
  }
  const double ninf = -std::numeric_limits<double>::infinity();
  Matrix y(N, d);

  for (std::size_t h = 0; h < H; ++h) {
    const auto& hp = params.head[h];
    const std::size_t off = h * dh;

    // Per token: ODE systems and initial states for key and value.
    std::vector<OdeSystem> ksys, vsys;
    std::vector<PairSolver> ksolve, vsolve;
    ksys.reserve(N);
    vsys.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
      const auto kr = K.row(i).subspan(off, dh);
      const auto vr = V.row(i).subspan(off, dh);
      if (dense) {
        ksys.push_back(dense_system(field.key[h]));
        vsys.push_back(dense_system(field.value[h]));
        ksolve.push_back({&ksys.back(), {kr.begin(), kr.end()}, 1});
        vsolve.push_back({&vsys.back(), {vr.begin(), vr.end()}, 1});
        continue;
      }
      const auto kt = head_trajectory(kr, hp.omega_k, hp.zeta_k, hp.U_k, hp.g_k, hp.h_k, drive, t[i]);
      const auto vt = head_trajectory(vr, hp.omega_v, hp.zeta_v, hp.U_v, hp.g_v, hp.h_v, drive, t[i]);
      ksys.push_back(oscillator_system(kt));
      vsys.push_back(oscillator_system(vt));
      std::vector<double> zk, zv;
      for (std::size_t c = 0; c < dh; ++c) {
        zk.insert(zk.end(), {kt.z0[c].x, kt.z0[c].p});
        zv.insert(zv.end(), {vt.z0[c].x, vt.z0[c].p});
      }
      ksolve.push_back({&ksys.back(), std::move(zk), 2});
      vsolve.push_back({&vsys.back(), std::move(zv), 2});
    }

    AttentionResult res{Matrix(N, N, ninf), Matrix(N, N), Matrix(N, dh)};
    std::vector<double> integrand(static_cast<std::size_t>(S) + 1);
    for (std::size_t j = 0; j < N; ++j) {
      std::vector<std::vector<double>> samples(j + 1);
      for (std::size_t l = 0; l <= j; ++l) {
        const auto r = Q.row(l).subspan(off, dh);
        samples[l].assign(r.begin(), r.end());
      }
      const auto q = fit_query(std::span<const double>(t.data(), j + 1), samples, params.grid, params.ridge);

      std::vector<double> row(N, ninf);
      std::vector<bool> valid(N, false);
      std::vector<std::vector<double>> vbar(j + 1, std::vector<double>(dh));
      for (std::size_t i = 0; i <= j; ++i) {
        valid[i] = true;
        if (i == j) {
          const auto qv = eval_query(q, t[j]);
          double acc = 0.0;
          for (std::size_t c = 0; c < dh; ++c) {
            acc += qv[c] * ksolve[i].z0[c * ksolve[i].stride];
            vbar[i][c] = vsolve[i].z0[c * vsolve[i].stride];
          }
          row[i] = acc;
          continue;
        }
        const double delta = t[j] - t[i];
        const double step = delta / S;
        const auto kp = solve_path(ksolve[i], t[i], t[j], S, probe);
        const std::size_t kdim = ksolve[i].z0.size();
        for (int n = 0; n <= S; ++n) {
          const auto qv = eval_query(q, t[i] + n * step);
          double acc = 0.0;
          for (std::size_t c = 0; c < dh; ++c) acc += qv[c] * kp[n * kdim + c * ksolve[i].stride];
          integrand[n] = acc;
        }
        row[i] = simpson_uniform(integrand, step) / delta;

        const auto vp = solve_path(vsolve[i], t[i], t[j], S, probe);
        const std::size_t vdim = vsolve[i].z0.size();
        for (std::size_t c = 0; c < dh; ++c) {
          for (int n = 0; n <= S; ++n) integrand[n] = vp[n * vdim + c * vsolve[i].stride];
          vbar[i][c] = simpson_uniform(integrand, step) / delta;
        }
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
