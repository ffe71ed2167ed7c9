#include "oscattn/hat.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "oscattn/attention.hpp"
#include "oscattn/propagator.hpp"
#include "oscattn/quadrature.hpp"

namespace osc {

double fejer_kernel(std::size_t N, double theta) {
  const double n1 = static_cast<double>(N + 1);
  const double half = std::sin(0.5 * theta);
  if (std::abs(half) < 1e-8) {
    // Near theta = 0 mod 2 pi the ratio tends to +-(N+1).
    double acc = 0.0;
    for (std::size_t k = 1; k <= N; ++k) acc += (1.0 - static_cast<double>(k) / n1) * std::cos(k * theta);
    return 1.0 + 2.0 * acc;
  }
  const double r = std::sin(0.5 * n1 * theta) / half;
  return r * r / n1;
}

std::vector<double> TrigPolynomial::eval(double t) const {
  std::vector<double> out = c0;
  for (std::size_t n = 1; n <= degree(); ++n) {
    const double arg = omega(n) * (t - base);
    const double cs = std::cos(arg), sn = std::sin(arg);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += c[n - 1][k] * cs + s[n - 1][k] * sn;
  }
  return out;
}

namespace {

/// cos(pi j / n) for j in [0, 2n): exact grid cosines for mode k at sample m
/// are table[(k m) mod 2n].
std::vector<double> cosine_table(std::size_t n) {
  std::vector<double> t(2 * n);
  for (std::size_t j = 0; j < 2 * n; ++j) t[j] = std::cos(kPi * static_cast<double>(j) / static_cast<double>(n));
  return t;
}

void validate_samples(const SampledFunction& f) {
  if (!(f.b > f.a)) throw RangeError("fejer_approx: require a < b");
  if (f.values.size() < kMinFejerSamples) throw ShapeError("fejer_approx: need at least 4096 samples");
  const std::size_t d = f.values.front().size();
  if (d == 0) throw ShapeError("fejer_approx: empty sample vectors");
  for (const auto& v : f.values) {
    if (v.size() != d) throw ShapeError("fejer_approx: ragged samples");
  }
}

TrigPolynomial weighted_cosine_series(const SampledFunction& f, std::size_t N, const std::vector<double>& table,
                                      bool cesaro) {
  const std::size_t n = f.values.size() - 1, d = f.values.front().size();
  TrigPolynomial p;
  p.base = f.a;
  p.L = f.b - f.a;
  p.c0.assign(d, 0.0);
  p.c.assign(N, std::vector<double>(d, 0.0));
  p.s.assign(N, std::vector<double>(d, 0.0));
  // (2/L) * trapezoid with h = L/n reduces to (2/n) * sum with halved ends.
  for (std::size_t m = 0; m <= n; ++m) {
    const double w = (m == 0 || m == n) ? 0.5 : 1.0;
    for (std::size_t k = 0; k < d; ++k) p.c0[k] += w * f.values[m][k];
    for (std::size_t j = 1; j <= N; ++j) {
      const double cs = w * table[(j * m) % (2 * n)];
      for (std::size_t k = 0; k < d; ++k) p.c[j - 1][k] += cs * f.values[m][k];
    }
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (auto& v : p.c0) v *= inv;
  for (std::size_t j = 1; j <= N; ++j) {
    const double weight = cesaro ? 1.0 - static_cast<double>(j) / static_cast<double>(N + 1) : 1.0;
    for (auto& v : p.c[j - 1]) v *= 2.0 * inv * weight;
  }
  return p;
}

/// sup over the sample grid (restricted to t >= from) of ||f - p||_2,
/// for a cosine-only polynomial based at f.a.
double grid_sup_error(const SampledFunction& f, const TrigPolynomial& p, const std::vector<double>& table,
                      double from) {
  const std::size_t n = f.values.size() - 1, d = p.dim();
  double worst = 0.0;
  std::vector<double> v(d);
  for (std::size_t m = 0; m <= n; ++m) {
    const double t = f.a + (f.b - f.a) * static_cast<double>(m) / static_cast<double>(n);
    if (t < from) continue;
    v = p.c0;
    for (std::size_t j = 1; j <= p.degree(); ++j) {
      const double cs = table[(j * m) % (2 * n)];
      for (std::size_t k = 0; k < d; ++k) v[k] += p.c[j - 1][k] * cs;
    }
    double e = 0.0;
    for (std::size_t k = 0; k < d; ++k) e += square(v[k] - f.values[m][k]);
    worst = std::max(worst, std::sqrt(e));
  }
  return worst;
}

}  // namespace

TrigPolynomial fejer_approx(const SampledFunction& f, std::size_t N) {
  validate_samples(f);
  return weighted_cosine_series(f, N, cosine_table(f.values.size() - 1), true);
}

TrigPolynomial fourier_partial_sum(const SampledFunction& f, std::size_t N) {
  validate_samples(f);
  return weighted_cosine_series(f, N, cosine_table(f.values.size() - 1), false);
}

TrigPolynomial phase_shift(const TrigPolynomial& p, double t_i) {
  TrigPolynomial out = p;
  out.base = t_i;
  for (std::size_t n = 1; n <= p.degree(); ++n) {
    const double phi = p.omega(n) * (t_i - p.base);
    const double cs = std::cos(phi), sn = std::sin(phi);
    for (std::size_t k = 0; k < p.dim(); ++k) {
      out.c[n - 1][k] = cs * p.c[n - 1][k] + sn * p.s[n - 1][k];
      out.s[n - 1][k] = -sn * p.c[n - 1][k] + cs * p.s[n - 1][k];
    }
  }
  return out;
}

OscillatorBank realize_bank(const TrigPolynomial& p, std::size_t M) {
  if (M < p.degree()) {
    throw CapacityError("realize_bank: " + std::to_string(M) + " modes cannot carry degree " +
                        std::to_string(p.degree()));
  }
  OscillatorBank bank;
  bank.anchor = p.base;
  bank.L = p.L;
  bank.d = p.dim();
  bank.gamma.assign(M + 1, 0.0);
  bank.z0.assign(M + 1, std::vector<State2<double>>(p.dim()));
  for (std::size_t k = 0; k < p.dim(); ++k) bank.z0[0][k] = {p.c0[k], 0.0};
  for (std::size_t n = 1; n <= p.degree(); ++n) {
    for (std::size_t k = 0; k < p.dim(); ++k) bank.z0[n][k] = {p.c[n - 1][k], bank.omega(n) * p.s[n - 1][k]};
  }
  return bank;
}

std::vector<double> bank_readout(const OscillatorBank& bank, double t) {
  const double s = t - bank.anchor;
  if (!(s >= 0.0)) throw CausalityError("bank_readout: t precedes the anchor");
  std::vector<double> out(bank.d, 0.0);
  if (bank.z0.empty()) return out;
  // Zero mode: x'' + 2 g x' = 0.
  const double g0 = bank.gamma[0];
  const double drift = g0 > 0.0 ? -std::expm1(-2.0 * g0 * s) / (2.0 * g0) : s;
  for (std::size_t k = 0; k < bank.d; ++k) out[k] = bank.z0[0][k].x + bank.z0[0][k].p * drift;
  for (std::size_t n = 1; n < bank.z0.size(); ++n) {
    const auto P = exp_At(OscParams<double>{bank.gamma[n], bank.omega(n)}, s);
    for (std::size_t k = 0; k < bank.d; ++k) out[k] += P.m11 * bank.z0[n][k].x + P.m12 * bank.z0[n][k].p;
  }
  return out;
}

PerturbationReport damping_perturbation(const OscillatorBank& bank, double gamma_max, double t_end,
                                        std::size_t points) {
  if (!(gamma_max >= 0.0) || !std::isfinite(gamma_max)) throw RangeError("damping_perturbation: gamma_max >= 0");
  if (!(t_end >= bank.anchor)) throw RangeError("damping_perturbation: t_end precedes the anchor");
  if (points < 2) throw RangeError("damping_perturbation: need at least two instants");
  OscillatorBank free = bank, damped = bank;
  std::fill(free.gamma.begin(), free.gamma.end(), 0.0);
  std::fill(damped.gamma.begin(), damped.gamma.end(), gamma_max);
  PerturbationReport r{gamma_max, 0.0};
  for (std::size_t m = 0; m < points; ++m) {
    const double t = bank.anchor + (t_end - bank.anchor) * static_cast<double>(m) / static_cast<double>(points - 1);
    const auto x0 = bank_readout(free, t);
    const auto x1 = bank_readout(damped, t);
    double e = 0.0;
    for (std::size_t k = 0; k < x0.size(); ++k) e += square(x1[k] - x0[k]);
    r.sup_difference = std::max(r.sup_difference, std::sqrt(e));
  }
  return r;
}

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double gap2(const std::vector<double>& u, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += square(u[k] - v[k]);
  return std::sqrt(s);
}

double dot(const std::vector<double>& u, const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) s += u[k] * v[k];
  return s;
}

void validate(const QueryExpansion<double>& q, const HatKeys& keys, const HatOptions& opts) {
  if (!(opts.epsilon > 0.0) || !std::isfinite(opts.epsilon)) throw RangeError("hat_certificate: epsilon > 0");
  if (!(opts.gamma >= 0.0)) throw RangeError("hat_certificate: gamma >= 0");
  if (!(keys.b > keys.a)) throw RangeError("hat_certificate: require a < b");
  if (keys.anchors.size() != keys.keys.size() || keys.keys.empty()) {
    throw ShapeError("hat_certificate: one anchor per key, at least one key");
  }
  for (std::size_t i = 0; i < keys.anchors.size(); ++i) {
    if (!(keys.anchors[i] >= keys.a && keys.anchors[i] < keys.b)) throw RangeError("hat_certificate: anchor outside [a, b)");
    if (i > 0 && !(keys.anchors[i] > keys.anchors[i - 1])) throw OrderingError("hat_certificate: anchors must increase");
  }
  if (q.dim() != keys.dim) throw ShapeError("hat_certificate: query and key widths differ");
  if (opts.n_start == 0 || opts.n_max < opts.n_start) throw RangeError("hat_certificate: bad mode budget");
  if (opts.fit_intervals + 1 < kMinFejerSamples || opts.quad_intervals < 2 || opts.quad_intervals % 2 != 0 ||
      opts.check_points < 2) {
    throw RangeError("hat_certificate: bad sampling options");
  }
}

}  // namespace

HatCertificate hat_certificate(const QueryExpansion<double>& q, const HatKeys& keys, const HatOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  validate(q, keys, opts);
  const std::size_t nk = keys.keys.size(), d = keys.dim, n = opts.fit_intervals;
  const double a = keys.a, b = keys.b;

  // Constant-hold extensions sampled on [a, b].
  std::vector<SampledFunction> ext(nk);
  for (std::size_t i = 0; i < nk; ++i) {
    ext[i].a = a;
    ext[i].b = b;
    const auto held = keys.keys[i](keys.anchors[i]);
    if (held.size() != d) throw ShapeError("hat_certificate: key width mismatch");
    for (std::size_t m = 0; m <= n; ++m) {
      const double t = a + (b - a) * static_cast<double>(m) / static_cast<double>(n);
      ext[i].values.push_back(keys.hold_before_anchor && t < keys.anchors[i] ? held : keys.keys[i](t));
    }
  }

  HatCertificate cert;
  cert.epsilon = opts.epsilon;
  cert.gamma = opts.gamma;
  const auto table = cosine_table(n);
  std::vector<TrigPolynomial> poly(nk);
  bool found = false;
  std::size_t N = opts.n_start;
  for (;; N = std::min(2 * N, opts.n_max)) {
    double worst = 0.0;
    for (std::size_t i = 0; i < nk; ++i) {
      // Any polynomial within epsilon/2 serves; keep the better of the
      // Fejer mean and the plain partial sum.
      auto fej = weighted_cosine_series(ext[i], N, table, true);
      auto dir = weighted_cosine_series(ext[i], N, table, false);
      const double ef = grid_sup_error(ext[i], fej, table, a);
      const double ed = grid_sup_error(ext[i], dir, table, a);
      poly[i] = ef <= ed ? std::move(fej) : std::move(dir);
      worst = std::max(worst, std::min(ef, ed));
    }
    if (worst < 0.5 * opts.epsilon) {
      found = true;
      break;
    }
    if (N >= opts.n_max) break;
  }
  cert.N_used = N;
  cert.capacity_exhausted = !found;

  std::vector<OscillatorBank> bank(nk);
  for (std::size_t i = 0; i < nk; ++i) {
    bank[i] = realize_bank(phase_shift(poly[i], keys.anchors[i]), N);
    std::fill(bank[i].gamma.begin(), bank[i].gamma.end(), opts.gamma);
  }

  // Key errors on a dense grid of [t_i, b]; quadrature nodes below also
  // contribute, so the measured sups cover every point the logits use.
  cert.per_key_sup_error.assign(nk, 0.0);
  for (std::size_t m = 0; m <= n; ++m) {
    cert.q_sup = std::max(cert.q_sup, norm2(eval_query(q, a + (b - a) * static_cast<double>(m) / n)));
  }
  for (std::size_t i = 0; i < nk; ++i) {
    const double ti = keys.anchors[i];
    for (std::size_t m = 0; m < opts.check_points; ++m) {
      const double t = ti + (b - ti) * static_cast<double>(m) / static_cast<double>(opts.check_points - 1);
      cert.per_key_sup_error[i] = std::max(cert.per_key_sup_error[i], gap2(keys.keys[i](t), bank_readout(bank[i], t)));
    }
  }

  const std::size_t Q = opts.quad_intervals;
  std::vector<double> alpha(nk * nk, 0.0), alpha_b(nk * nk, 0.0);  // [j * nk + i]
  std::vector<double> f(Q + 1), fb(Q + 1);
  for (std::size_t i = 0; i < nk; ++i) {
    const double ti = keys.anchors[i];
    for (std::size_t j = i; j < nk; ++j) {
      const double tj = keys.anchors[j];
      if (j == i) {
        const auto qv = eval_query(q, ti);
        alpha[j * nk + i] = dot(qv, keys.keys[i](ti));
        alpha_b[j * nk + i] = dot(qv, bank_readout(bank[i], ti));
        continue;
      }
      const double h = (tj - ti) / static_cast<double>(Q);
      for (std::size_t m = 0; m <= Q; ++m) {
        const double t = m == Q ? tj : ti + h * static_cast<double>(m);
        const auto qv = eval_query(q, t);
        const auto kv = keys.keys[i](t);
        const auto kb = bank_readout(bank[i], t);
        cert.q_sup = std::max(cert.q_sup, norm2(qv));
        cert.per_key_sup_error[i] = std::max(cert.per_key_sup_error[i], gap2(kv, kb));
        f[m] = dot(qv, kv);
        fb[m] = dot(qv, kb);
      }
      alpha[j * nk + i] = simpson_uniform(f, h) / (tj - ti);
      alpha_b[j * nk + i] = simpson_uniform(fb, h) / (tj - ti);
    }
  }

  const double max_err = *std::max_element(cert.per_key_sup_error.begin(), cert.per_key_sup_error.end());
  const double slack = 1.0 + 1e-12;
  const double root_d = std::sqrt(static_cast<double>(d));
  cert.chain_ok = true;
  for (std::size_t j = 0; j < nk; ++j) {
    std::vector<double> row(nk, 0.0), row_b(nk, 0.0);
    std::vector<bool> valid(nk, false);
    for (std::size_t i = 0; i <= j; ++i) {
      row[i] = alpha[j * nk + i];
      row_b[i] = alpha_b[j * nk + i];
      valid[i] = true;
      const double g = std::abs(row[i] - row_b[i]);
      cert.max_logit_gap = std::max(cert.max_logit_gap, g);
      if (g > cert.q_sup * cert.per_key_sup_error[i] * slack) cert.chain_ok = false;
    }
    const auto w = masked_softmax(row, static_cast<double>(d), valid);
    const auto wb = masked_softmax(row_b, static_cast<double>(d), valid);
    double l1 = 0.0;
    for (std::size_t i = 0; i <= j; ++i) l1 += std::abs(w[i] - wb[i]);
    cert.max_l1_gap = std::max(cert.max_l1_gap, l1);
    if (l1 > cert.q_sup * max_err / root_d * slack) cert.chain_ok = false;
  }

  cert.keys_ok = max_err < opts.epsilon;
  cert.logits_ok = cert.max_logit_gap <= cert.q_sup * opts.epsilon;
  cert.l1_ok = cert.max_l1_gap <= cert.q_sup * opts.epsilon / root_d;
  cert.bounds_ok = found && cert.keys_ok && cert.logits_ok && cert.l1_ok && cert.chain_ok;
  cert.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return cert;
}

nlohmann::json to_json(const HatCertificate& c) {
  return {{"epsilon", c.epsilon},
          {"gamma", c.gamma},
          {"N_used", c.N_used},
          {"capacity_exhausted", c.capacity_exhausted},
          {"per_key_sup_error", c.per_key_sup_error},
          {"q_sup", c.q_sup},
          {"max_logit_gap", c.max_logit_gap},
          {"max_l1_gap", c.max_l1_gap},
          {"checks",
           {{"keys", c.keys_ok}, {"logits", c.logits_ok}, {"softmax_l1", c.l1_ok}, {"measured_chain", c.chain_ok}}},
          {"bounds_ok", c.bounds_ok},
          {"seconds", c.seconds}};
}

HatProblem triangle_problem(std::size_t n_keys, std::size_t dim, double a, double b, Rng& rng) {
  if (n_keys == 0 || dim == 0 || !(b > a)) throw RangeError("triangle_problem: need keys, width and a < b");
  const double L = b - a;
  HatProblem pr;
  pr.keys.a = a;
  pr.keys.b = b;
  pr.keys.dim = dim;
  // Anchors spread over the first 80% of the window.
  for (std::size_t i = 0; i < n_keys; ++i) {
    const double lo = a + 0.8 * L * static_cast<double>(i) / static_cast<double>(n_keys);
    pr.keys.anchors.push_back(lo + rng.uniform(0.0, 0.8 * L / static_cast<double>(n_keys)));
  }
  for (std::size_t i = 0; i < n_keys; ++i) {
    std::vector<double> amp(dim), period(dim), phase(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      amp[k] = rng.uniform(0.5, 1.0);
      period[k] = rng.uniform(0.3, 0.8) * L;
      phase[k] = rng.uniform(0.0, 1.0);
    }
    pr.keys.keys.push_back([amp, period, phase](double t) {
      std::vector<double> v(amp.size());
      for (std::size_t k = 0; k < v.size(); ++k) {
        const double u = t / period[k] + phase[k];
        v[k] = amp[k] * (1.0 - 4.0 * std::abs(u - std::floor(u) - 0.5));
      }
      return v;
    });
  }
  pr.q.grid = FrequencyGrid{{2.0 * kPi / L, 4.0 * kPi / L, 6.0 * kPi / L}, true};
  pr.q.dc.resize(dim);
  for (auto& x : pr.q.dc) x = rng.uniform(-0.5, 0.5);
  for (std::size_t j = 0; j < 3; ++j) {
    pr.q.A.emplace_back(dim);
    pr.q.B.emplace_back(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      pr.q.A[j][k] = rng.uniform(-1.0, 1.0) / static_cast<double>(j + 1);
      pr.q.B[j][k] = rng.uniform(-1.0, 1.0) / static_cast<double>(j + 1);
    }
  }
  return pr;
}

}  // namespace osc
