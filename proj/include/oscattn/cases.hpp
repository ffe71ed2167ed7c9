#pragma once

// Random oscillator, query and key configurations for property checks, with
// a Gauss-Legendre reference for the attention logit.

#include <algorithm>
#include <cmath>
#include <vector>

#include "oscattn/attention.hpp"
#include "oscattn/quadrature.hpp"

namespace osc {

/// Random parameters in a given regime (0 under, 1 critical, 2 over) on the
/// scale of the layer defaults.
inline OscParams<double> random_params(Rng& rng, int regime) {
  const double w = rng.uniform(0.2, 4.0);
  switch (regime) {
    case 0: return {rng.uniform(0.0, 0.95) * w, w};
    case 1: return {w, w};
    default: return {rng.uniform(1.05, 3.0) * w, w};
  }
}

inline QueryExpansion<> random_query(Rng& rng, std::size_t d, std::size_t J) {
  QueryExpansion<> q;
  double w = rng.uniform(0.5, 2.0);
  for (std::size_t j = 0; j < J; ++j) {
    q.grid.freqs.push_back(w);
    w *= rng.uniform(1.2, 2.0);
  }
  q.grid.dc = true;
  q.dc.resize(d);
  for (auto& v : q.dc) v = rng.uniform(-1, 1);
  for (std::size_t j = 0; j < J; ++j) {
    std::vector<double> a(d), b(d);
    for (std::size_t c = 0; c < d; ++c) {
      a[c] = rng.uniform(-1, 1);
      b[c] = rng.uniform(-1, 1);
    }
    q.A.push_back(a);
    q.B.push_back(b);
  }
  return q;
}

/// regime < 0 mixes regimes across coordinates.
inline KeyTrajectory<> random_key(Rng& rng, std::size_t d, std::size_t modes, int regime, bool offset = true) {
  KeyTrajectory<> k;
  k.anchor = rng.uniform(0.0, 1.0);
  for (std::size_t c = 0; c < d; ++c) {
    const int r = regime < 0 ? static_cast<int>(rng.below(3)) : regime;
    k.params.push_back(random_params(rng, r));
    k.z0.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    k.offset.push_back(offset ? rng.uniform(-0.5, 0.5) : 0.0);
  }
  for (std::size_t m = 0; m < modes; ++m) {
    k.forcing.freqs.push_back(rng.uniform(0.3, 8.0));
    std::vector<double> P(d), Q(d);
    for (std::size_t c = 0; c < d; ++c) {
      P[c] = rng.uniform(-2, 2);
      Q[c] = rng.uniform(-2, 2);
    }
    k.forcing.P.push_back(P);
    k.forcing.Q.push_back(Q);
  }
  return k;
}

struct OracleLogit {
  double value;
  double scale;  // (1/delta) integral of sum_c |q_c k_c|
};

inline OracleLogit oracle_logit(const QueryExpansion<>& q, const KeyTrajectory<>& k, double t_j, int nodes = 512) {
  const auto pk = prepare_key(k);
  const double delta = t_j - k.anchor;
  const auto& rule = gauss_legendre(nodes);
  double v = 0.0, s = 0.0;
  for (int n = 0; n < nodes; ++n) {
    const double x = k.anchor + 0.5 * delta * (1.0 + rule.nodes[n]);
    const auto qv = eval_query(q, x);
    for (std::size_t c = 0; c < k.dim(); ++c) {
      const double kv = eval_channel(pk.channels[c], pk.drive_freqs, x - k.anchor).x;
      v += rule.weights[n] * qv[c] * kv;
      s += rule.weights[n] * std::abs(qv[c] * kv);
    }
  }
  return {0.5 * v, 0.5 * s};
}

}  // namespace osc
