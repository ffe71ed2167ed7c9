#include "oscattn/toytrain.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "oscattn/config_json.hpp"

namespace osc {

using ad::Var;

// ---------------------------------------------------------------------------
// parameters

std::size_t ParamSet::add(const std::string& name, std::size_t size) {
  const std::size_t off = values.size();
  groups.push_back({name, off, size});
  values.resize(off + size, 0.0);
  return off;
}

const ParamSet::Group& ParamSet::group(const std::string& name) const {
  for (const auto& g : groups) {
    if (g.name == name) return g;
  }
  throw ParameterError("unknown parameter group: " + name);
}

std::span<double> ParamSet::slice(const std::string& name) {
  const auto& g = group(name);
  return {values.data() + g.offset, g.size};
}

std::span<const double> ParamSet::slice(const std::string& name) const {
  const auto& g = group(name);
  return {values.data() + g.offset, g.size};
}

std::vector<Var> lift_params(const ParamSet& p, bool record) {
  std::vector<Var> out;
  out.reserve(p.values.size());
  for (double v : p.values) out.push_back(record ? Var::param(v) : Var(v));
  return out;
}

namespace {

double log_uniform(Rng& rng, double lo, double hi) { return std::exp(rng.uniform(std::log(lo), std::log(hi))); }

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

double elapsed(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Softmax of Vars with the running maximum removed as a constant.
std::vector<Var> softmax(const std::vector<Var>& x) {
  double mx = -std::numeric_limits<double>::infinity();
  for (const auto& v : x) mx = std::max(mx, v.v);
  std::vector<Var> e;
  e.reserve(x.size());
  Var z = 0.0;
  for (const auto& v : x) {
    e.push_back(exp(v - mx));
    z = z + e.back();
  }
  for (auto& v : e) v = v / z;
  return e;
}

/// One gradient step over a batch: runs `loss_fn` on a fresh tape.
template <class LossFn>
double train_step(ParamSet& params, AdamWState& state, double lr, const AdamWConfig& cfg, LossFn loss_fn) {
  ad::Tape tape;
  ad::TapeScope scope(tape);
  const auto theta = lift_params(params, true);
  const Var loss = loss_fn(theta);
  const auto g = ad::grad(loss);
  std::vector<double> grads(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) grads[k] = g[theta[k]];
  adamw_step(params.values, grads, state, lr, cfg);
  return loss.v;
}

}  // namespace

// ---------------------------------------------------------------------------
// classification data

void ClassifyConfig::validate() const {
  if (M < 2 || L < 2 || d < 1 || J < 1 || hidden < 1 || batch < 1 || n_train < 1 || n_val < 1) {
    throw ParameterError("classify config: counts must be positive (M, L >= 2)");
  }
  if (J > M) throw ParameterError("classify config: J must not exceed M");
  if (!(T > 0.0) || !(poisson_rate > 0.0) || !(amp_lo > 0.0) || !(amp_hi >= amp_lo) || !(noise >= 0.0) ||
      !(omega_min > 0.0) || !(d_omega > 0.0) || !(lr > 0.0) || !(weight_decay >= 0.0) || !(embed_scale > 0.0) ||
      !(warmup_frac >= 0.0 && warmup_frac < 1.0) || !(ridge >= 0.0)) {
    throw ParameterError("classify config: invalid real-valued setting");
  }
}

std::vector<double> class_frequencies(const ClassifyConfig& cfg) {
  std::vector<double> w(cfg.M);
  for (std::size_t m = 0; m < cfg.M; ++m) w[m] = cfg.omega_min + static_cast<double>(m) * cfg.d_omega;
  return w;
}

std::vector<double> query_frequencies(const ClassifyConfig& cfg) {
  const auto all = class_frequencies(cfg);
  if (cfg.J == cfg.M) return all;
  if (cfg.J == 1) return {all[cfg.M / 2]};
  std::vector<double> w;
  for (std::size_t k = 0; k < cfg.J; ++k) {
    const double pos = static_cast<double>(k) * static_cast<double>(cfg.M - 1) / static_cast<double>(cfg.J - 1);
    w.push_back(all[static_cast<std::size_t>(std::lround(pos))]);
  }
  return w;
}

std::vector<ClassSequence> gen_classification(const ClassifyConfig& cfg, std::size_t n, Rng& rng) {
  cfg.validate();
  const auto freqs = class_frequencies(cfg);
  std::vector<ClassSequence> out(n);
  for (auto& s : out) {
    Rng r = rng.split();
    s.label = static_cast<int>(r.below(cfg.M));
    std::vector<double> arrivals(cfg.L);
    double acc = 0.0;
    for (auto& a : arrivals) a = (acc += r.exponential(cfg.poisson_rate));
    const double scale = cfg.T / arrivals.back();
    const double amp = cfg.amp_hi > cfg.amp_lo ? r.uniform(cfg.amp_lo, cfg.amp_hi) : cfg.amp_lo;
    const double phase = r.uniform(0.0, 2.0 * kPi);
    const double w = freqs[static_cast<std::size_t>(s.label)];
    for (double a : arrivals) {
      const double t = a * scale;
      s.t.push_back(t);
      s.x.push_back({amp * std::cos(w * t + phase) + r.normal(0.0, cfg.noise),
                     amp * std::sin(w * t + phase) + r.normal(0.0, cfg.noise)});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// classifier

Classifier::Classifier(const ClassifyConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  grid_ = FrequencyGrid{query_frequencies(cfg_), true};
  const std::size_t J = cfg_.J, cols = grid_.columns(), K = cfg_.key_count();
  for (std::size_t b = 0; b < 2 * J; ++b) drive_.push_back(grid_.freqs[b % J]);
  for (std::size_t a = 0; a < cols; ++a) {
    const std::vector<double> qf = a == 0 ? std::vector<double>{} : std::vector<double>{grid_.freqs[(a - 1) % J]};
    for (std::size_t b = 0; b < 2 * J; ++b) tables_.push_back(make_window_tables(qf, {drive_[b]}, cfg_.T));
  }

  const std::size_t d = cfg_.d, H = cfg_.hidden, M = cfg_.M;
  params.add("embed_q", d * 2);
  params.add("embed_q_bias", d);
  params.add("embed_k", d * 2);
  params.add("embed_k_bias", d);
  params.add("key_u", K);
  params.add("key_v", K);
  params.add("values", K * d);
  params.add("w1", H * d);
  params.add("b1", H);
  params.add("w2", M * H);
  params.add("b2", M);

  // The drive embedding starts as the query embedding turned a quarter
  // period, so the initial logits follow the quadrature response, which
  // peaks at resonance.
  auto eq = params.slice("embed_q");
  auto ek = params.slice("embed_k");
  for (double& e : eq) e = cfg_.embed_scale * rng.uniform(-1.0, 1.0) / std::sqrt(2.0);
  for (std::size_t c = 0; c < d; ++c) {
    ek[2 * c] = eq[2 * c + 1];
    ek[2 * c + 1] = -eq[2 * c];
  }
  const auto freqs = class_frequencies(cfg_);
  auto u = params.slice("key_u");
  auto v = params.slice("key_v");
  for (std::size_t i = 0; i < K; ++i) {
    const double w0 = K == 1 ? freqs.front()
                             : freqs.front() + (freqs.back() - freqs.front()) * static_cast<double>(i) /
                                                   static_cast<double>(K - 1);
    const double zeta = rng.uniform(0.05, 0.4);
    u[i] = softplus_inverse(w0 - 1e-3);
    v[i] = softplus_inverse(zeta);
  }
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& e : params.slice("values")) e = rng.uniform(-sd, sd);
  for (double& e : params.slice("w1")) e = rng.uniform(-sd, sd);
  // w2 and b2 start at zero: an untrained model predicts no class.
}

Classifier::Prepared Classifier::prepare(const ClassSequence& seq) const {
  const auto hat = make_query_hat(seq.t, grid_, cfg_.ridge);
  const std::size_t cols = grid_.columns(), n = seq.t.size();
  Prepared p;
  p.label = seq.label;
  p.P.assign(cols * 2, 0.0);
  p.s.assign(cols, 0.0);
  for (std::size_t a = 0; a < cols; ++a) {
    for (std::size_t l = 0; l < n; ++l) {
      const double h = hat.H[a * n + l];
      p.P[a * 2] += h * seq.x[l][0];
      p.P[a * 2 + 1] += h * seq.x[l][1];
      p.s[a] += h;
    }
  }
  return p;
}

std::vector<std::vector<Var>> Classifier::key_kernels(const std::vector<Var>& theta) const {
  const std::size_t J = cfg_.J, cols = grid_.columns(), K = cfg_.key_count();
  const std::size_t u0 = params.group("key_u").offset, v0 = params.group("key_v").offset;

  std::vector<RotatedQuery<Var>> unit(cols);
  for (std::size_t a = 0; a < cols; ++a) {
    if (a == 0) {
      unit[a].dc = {Var(1.0)};
      continue;
    }
    unit[a].freqs = {grid_.freqs[(a - 1) % J]};
    unit[a].A_tilde = {{Var(a <= J ? 1.0 : 0.0)}};
    unit[a].B_tilde = {{Var(a <= J ? 0.0 : 1.0)}};
  }

  std::vector<std::vector<Var>> out(K, std::vector<Var>(cols * 2 * J));
  for (std::size_t i = 0; i < K; ++i) {
    const Var w0 = softplus(theta[u0 + i]) + 1e-3;
    const OscParams<Var> p{softplus(theta[v0 + i]) * w0, w0};
    for (std::size_t b = 0; b < 2 * J; ++b) {
      KeyTrajectory<Var> k;
      k.params = {p};
      k.z0 = {{Var(0.0), Var(0.0)}};
      k.forcing.freqs = {drive_[b]};
      k.forcing.P = {{Var(b < J ? 1.0 : 0.0)}};
      k.forcing.Q = {{Var(b < J ? 0.0 : 1.0)}};
      const auto ch = prepare_channels(k).front();
      for (std::size_t a = 0; a < cols; ++a) {
        out[i][a * 2 * J + b] = channel_integral(unit[a], 0, ch, tables_[a * 2 * J + b]) / cfg_.T;
      }
    }
  }
  return out;
}

Classifier::Output Classifier::forward(const std::vector<Var>& theta, const std::vector<std::vector<Var>>& kernels,
                                       const Prepared& x) const {
  const std::size_t J = cfg_.J, cols = grid_.columns(), K = cfg_.key_count();
  const std::size_t d = cfg_.d, H = cfg_.hidden, M = cfg_.M;
  const std::size_t eq = params.group("embed_q").offset, bq = params.group("embed_q_bias").offset;
  const std::size_t ek = params.group("embed_k").offset, bk = params.group("embed_k_bias").offset;

  // With c_a = Eq P_a + s_a bq and e_b = Ek P_b + s_b bk, <c_a, e_b> is
  // linear in the nine inner products between columns of [Eq bq] and [Ek bk].
  std::vector<Var> q0(d), q1(d), k0(d), k1(d);
  for (std::size_t c = 0; c < d; ++c) {
    q0[c] = theta[eq + 2 * c];
    q1[c] = theta[eq + 2 * c + 1];
    k0[c] = theta[ek + 2 * c];
    k1[c] = theta[ek + 2 * c + 1];
  }
  const std::span<const Var> qb(theta.data() + bq, d), kb(theta.data() + bk, d);
  const std::array<Var, 9> feats{ad::dot(q0, k0), ad::dot(q0, k1), ad::dot(q1, k0),
                                 ad::dot(q1, k1), ad::dot(q0, kb), ad::dot(q1, kb),
                                 ad::dot(qb, k0), ad::dot(qb, k1), ad::dot(qb, kb)};

  std::vector<Var> gram(cols * 2 * J);
  for (std::size_t a = 0; a < cols; ++a) {
    const double pa0 = x.P[2 * a], pa1 = x.P[2 * a + 1], sa = x.s[a];
    for (std::size_t b = 0; b < 2 * J; ++b) {
      const std::size_t bb = b + 1;  // hat column of drive b
      const double pb0 = x.P[2 * bb], pb1 = x.P[2 * bb + 1], sb = x.s[bb];
      const std::array<double, 9> coef{pa0 * pb0, pa0 * pb1, pa1 * pb0, pa1 * pb1, sb * pa0,
                                       sb * pa1,  sa * pb0,  sa * pb1,  sa * sb};
      gram[a * 2 * J + b] = ad::lincomb(coef, feats);
    }
  }

  Output out;
  std::vector<Var> logits(K);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  for (std::size_t i = 0; i < K; ++i) logits[i] = ad::dot(gram, kernels[i]) * scale;
  out.attention = softmax(logits);

  const std::size_t v0 = params.group("values").offset;
  std::vector<Var> vbar(d), col(K);
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t i = 0; i < K; ++i) col[i] = theta[v0 + i * d + c];
    vbar[c] = ad::dot(out.attention, col);
  }
  const std::size_t w1 = params.group("w1").offset, b1 = params.group("b1").offset;
  const std::size_t w2 = params.group("w2").offset, b2 = params.group("b2").offset;
  std::vector<Var> hidden(H);
  for (std::size_t h = 0; h < H; ++h) {
    hidden[h] = relu(ad::dot(std::span<const Var>(theta.data() + w1 + h * d, d), vbar) + theta[b1 + h]);
  }
  out.logits.resize(M);
  for (std::size_t m = 0; m < M; ++m) {
    out.logits[m] = ad::dot(std::span<const Var>(theta.data() + w2 + m * H, H), hidden) + theta[b2 + m];
  }
  return out;
}

Var Classifier::loss(const std::vector<Var>& theta, std::span<const Prepared> batch) const {
  const auto kernels = key_kernels(theta);
  Var total = 0.0;
  for (const auto& x : batch) {
    const auto out = forward(theta, kernels, x);
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& l : out.logits) mx = std::max(mx, l.v);
    Var z = 0.0;
    for (const auto& l : out.logits) z = z + exp(l - mx);
    total = total + (log(z) + mx - out.logits[static_cast<std::size_t>(x.label)]);
  }
  return total / static_cast<double>(batch.size());
}

std::vector<double> Classifier::key_omega0() const {
  std::vector<double> w;
  for (double u : params.slice("key_u")) w.push_back(softplus(u) + 1e-3);
  return w;
}

std::vector<double> Classifier::key_gamma() const {
  auto g = key_omega0();
  const auto v = params.slice("key_v");
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= softplus(v[i]);
  return g;
}

double classify_accuracy(const Classifier& model, std::span<const Classifier::Prepared> data,
                         std::vector<std::vector<double>>* confusion) {
  const auto theta = lift_params(model.params, false);
  const auto kernels = model.key_kernels(theta);
  const std::size_t M = model.config().M, K = model.config().key_count();
  std::vector<std::vector<double>> conf(M, std::vector<double>(K, 0.0));
  std::vector<std::size_t> count(M, 0);
  std::size_t correct = 0;
  for (const auto& x : data) {
    const auto out = model.forward(theta, kernels, x);
    std::size_t best = 0;
    for (std::size_t m = 1; m < M; ++m) {
      if (out.logits[m].v > out.logits[best].v) best = m;
    }
    correct += best == static_cast<std::size_t>(x.label);
    const auto y = static_cast<std::size_t>(x.label);
    ++count[y];
    for (std::size_t i = 0; i < K; ++i) conf[y][i] += out.attention[i].v;
  }
  if (confusion) {
    for (std::size_t m = 0; m < M; ++m) {
      for (auto& v : conf[m]) v = count[m] ? v / static_cast<double>(count[m]) : 0.0;
    }
    *confusion = std::move(conf);
  }
  return data.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(data.size());
}

double transfer_magnitude(double omega0, double gamma, double omega) {
  return 1.0 / std::sqrt(square(omega0 * omega0 - omega * omega) + square(2.0 * gamma * omega));
}

ClassifyMetrics train_classifier(const ClassifyConfig& cfg, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  ClassifyMetrics m;
  m.seed = rng.seed();
  Rng data_rng = rng.split();
  const auto train_raw = gen_classification(cfg, cfg.n_train, data_rng);
  const auto val_raw = gen_classification(cfg, cfg.n_val, data_rng);
  Classifier model(cfg, rng);
  std::vector<Classifier::Prepared> train, val;
  for (const auto& s : train_raw) train.push_back(model.prepare(s));
  for (const auto& s : val_raw) val.push_back(model.prepare(s));

  m.untrained_val_accuracy = classify_accuracy(model, val);
  const AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.warmup_frac};
  AdamWState state;
  const std::size_t per_epoch = (cfg.n_train + cfg.batch - 1) / cfg.batch;
  const long total = static_cast<long>(per_epoch * cfg.epochs);
  long step = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> best = model.params.values;
  m.val_accuracy = -1.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double sum = 0.0;
    std::vector<Classifier::Prepared> batch;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      batch.clear();
      for (std::size_t k = b0; k < std::min(order.size(), b0 + cfg.batch); ++k) batch.push_back(train[order[k]]);
      double l = 0.0;
      try {
        l = train_step(model.params, state, cosine_lr(cfg.lr, step++, total, cfg.warmup_frac), opt,
                       [&](const std::vector<Var>& theta) { return model.loss(theta, batch); });
      } catch (const PoisonedGradientError& e) {
        throw TrainingError("classifier diverged at epoch " + std::to_string(epoch) + " (seed " +
                            std::to_string(m.seed) + "): " + e.what());
      }
      if (!std::isfinite(l)) {
        throw TrainingError("classifier loss is not finite at epoch " + std::to_string(epoch) + " (seed " +
                            std::to_string(m.seed) + ")");
      }
      sum += l * static_cast<double>(batch.size());
    }
    m.train_loss.push_back(sum / static_cast<double>(train.size()));
    const double acc = classify_accuracy(model, val);
    m.val_curve.push_back(acc);
    if (acc > m.val_accuracy) {
      m.val_accuracy = acc;
      m.best_epoch = epoch;
      best = model.params.values;
    }
    m.epochs_run = epoch + 1;
  }
  m.final_val_accuracy = m.val_curve.empty() ? m.untrained_val_accuracy : m.val_curve.back();
  if (m.val_accuracy < 0.0) m.val_accuracy = m.untrained_val_accuracy;
  model.params.values = best;

  std::vector<std::vector<double>> conf;
  classify_accuracy(model, val, &conf);
  const auto w0 = model.key_omega0();
  const auto g = model.key_gamma();
  std::vector<std::size_t> keys(w0.size());
  std::iota(keys.begin(), keys.end(), 0);
  std::sort(keys.begin(), keys.end(), [&](std::size_t a, std::size_t b) { return w0[a] < w0[b]; });
  const std::size_t K = keys.size();
  double diag = 0.0;
  for (std::size_t r = 0; r < cfg.M; ++r) {
    std::vector<double> row;
    for (std::size_t i : keys) row.push_back(conf[r][i]);
    if (r < K) diag += row[r];
    m.confusion.push_back(std::move(row));
  }
  m.diagonal_ratio = diag / static_cast<double>(std::min(cfg.M, K)) * static_cast<double>(K);
  const double top = 2.0 * class_frequencies(cfg).back();
  for (int s = 1; s <= 200; ++s) m.profile_omega.push_back(top * s / 200.0);
  for (std::size_t i : keys) {
    m.key_omega0.push_back(w0[i]);
    m.key_gamma.push_back(g[i]);
    std::vector<double> prof;
    for (double w : m.profile_omega) prof.push_back(transfer_magnitude(w0[i], g[i], w));
    m.profile.push_back(std::move(prof));
  }
  m.seconds = elapsed(start);
  return m;
}

// ---------------------------------------------------------------------------
// regression

void RegressConfig::validate() const {
  if (freqs.empty() || keys < 1 || n_train < 2 || n_val < 2 || batch < 1) {
    throw ParameterError("regress config: counts must be positive");
  }
  for (double w : freqs) {
    if (!(w > 0.0)) throw ParameterError("regress config: frequencies must be positive");
  }
  if (min_components < 1 || max_components < min_components || max_components > freqs.size()) {
    throw ParameterError("regress config: component range must lie in [1, #freqs]");
  }
  if (!(T_obs > 0.0) || !(T_future > T_obs) || !(gap_shape > 0.0) || !(gap_scale > 0.0) || !(noise >= 0.0) ||
      !(amp_hi >= amp_lo) || !(lr > 0.0) || !(weight_decay >= 0.0) || !(warmup_frac >= 0.0 && warmup_frac < 1.0) ||
      !(key_omega_lo > 0.0) || !(key_omega_hi > key_omega_lo)) {
    throw ParameterError("regress config: invalid real-valued setting");
  }
}

std::vector<RegressSample> gen_regression(const RegressConfig& cfg, std::size_t n, Rng& rng) {
  cfg.validate();
  std::vector<RegressSample> out(n);
  const std::size_t F = cfg.freqs.size();
  for (auto& s : out) {
    Rng r = rng.split();
    const std::size_t k = cfg.min_components + r.below(cfg.max_components - cfg.min_components + 1);
    std::vector<std::size_t> idx(F);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < k; ++i) std::swap(idx[i], idx[i + r.below(F - i)]);
    std::vector<double> amp(k);
    for (auto& a : amp) a = cfg.amp_hi > cfg.amp_lo ? r.uniform(cfg.amp_lo, cfg.amp_hi) : cfg.amp_lo;
    do {
      s.t.clear();
      double t = 0.0;
      while ((t += r.gamma(cfg.gap_shape, cfg.gap_scale)) < cfg.T_obs) s.t.push_back(t);
    } while (s.t.size() < 2);
    for (double t : s.t) {
      double y = r.normal(0.0, cfg.noise);
      for (std::size_t i = 0; i < k; ++i) y += amp[i] * std::cos(cfg.freqs[idx[i]] * t);
      s.y.push_back(y);
    }
    s.target = 0.0;
    for (std::size_t i = 0; i < k; ++i) s.target += amp[i] * std::cos(cfg.freqs[idx[i]] * cfg.T_future);
  }
  return out;
}

std::vector<double> log_energy_features(const RegressSample& s, const std::vector<double>& freqs) {
  const std::size_t n = s.t.size();
  if (n < 2) throw ShapeError("log_energy_features: need at least two samples");
  const double T = s.t.back();
  std::vector<double> out;
  for (double w : freqs) {
    double a = 0.0, b = 0.0;
    for (std::size_t l = 0; l + 1 < n; ++l) {
      const double h = 0.5 * (s.t[l + 1] - s.t[l]);
      a += h * (s.y[l] * std::cos(w * s.t[l]) + s.y[l + 1] * std::cos(w * s.t[l + 1]));
      b += h * (s.y[l] * std::sin(w * s.t[l]) + s.y[l + 1] * std::sin(w * s.t[l + 1]));
    }
    a *= 2.0 / T;
    b *= 2.0 / T;
    out.push_back(std::log1p(a * a + b * b));
  }
  return out;
}

FeatureScaler FeatureScaler::fit(const std::vector<std::vector<double>>& x) {
  FeatureScaler f;
  const std::size_t J = x.front().size();
  f.mean.assign(J, 0.0);
  f.sd.assign(J, 0.0);
  for (const auto& r : x) {
    for (std::size_t j = 0; j < J; ++j) f.mean[j] += r[j];
  }
  for (auto& m : f.mean) m /= static_cast<double>(x.size());
  for (const auto& r : x) {
    for (std::size_t j = 0; j < J; ++j) f.sd[j] += square(r[j] - f.mean[j]);
  }
  for (auto& s : f.sd) s = std::max(std::sqrt(s / static_cast<double>(x.size())), 1e-12);
  return f;
}

std::vector<double> FeatureScaler::apply(const std::vector<double>& x) const {
  std::vector<double> z(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) z[j] = (x[j] - mean[j]) / sd[j];
  return z;
}

Regressor::Regressor(const RegressConfig& cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  const std::size_t K = cfg_.keys, J = cfg_.freqs.size();
  params.add("key_u", K);
  params.add("key_v", K);
  params.add("query_w", J);
  params.add("query_b", J);
  params.add("values", K);
  auto u = params.slice("key_u");
  auto v = params.slice("key_v");
  for (std::size_t i = 0; i < K; ++i) {
    const double w0 = log_uniform(rng, cfg_.key_omega_lo, cfg_.key_omega_hi);
    u[i] = softplus_inverse(w0 - 1e-3);
    v[i] = softplus_inverse(rng.uniform(0.05, 0.4) * w0);
  }
  for (double& w : params.slice("query_w")) w = 1.0;
  for (double& x : params.slice("values")) x = rng.normal(0.0, 0.5);
}

std::vector<std::vector<Var>> Regressor::transfer(const std::vector<Var>& theta) const {
  const std::size_t K = cfg_.keys;
  const std::size_t u0 = params.group("key_u").offset, v0 = params.group("key_v").offset;
  std::vector<std::vector<Var>> H(K);
  for (std::size_t i = 0; i < K; ++i) {
    const Var w0 = softplus(theta[u0 + i]) + 1e-3;
    const Var g = softplus(theta[v0 + i]);
    const Var w02 = w0 * w0;
    for (double w : cfg_.freqs) {
      const Var a = w02 - w * w;
      const Var b = g * (2.0 * w);
      H[i].push_back(1.0 / sqrt(a * a + b * b));
    }
  }
  return H;
}

Var Regressor::predict(const std::vector<Var>& theta, const std::vector<std::vector<Var>>& H,
                       std::span<const double> z, std::vector<Var>* weights) const {
  const std::size_t J = cfg_.freqs.size(), K = cfg_.keys;
  const std::size_t qw = params.group("query_w").offset, qb = params.group("query_b").offset;
  const std::size_t v0 = params.group("values").offset;
  std::vector<Var> Q(J);
  for (std::size_t j = 0; j < J; ++j) Q[j] = softplus(theta[qw + j] * z[j] + theta[qb + j]);
  std::vector<Var> alpha(K);
  for (std::size_t i = 0; i < K; ++i) alpha[i] = ad::dot(Q, H[i]);
  auto w = softmax(alpha);
  const Var y = ad::dot(w, std::span<const Var>(theta.data() + v0, K));
  if (weights) *weights = std::move(w);
  return y;
}

Var Regressor::loss(const std::vector<Var>& theta, std::span<const std::vector<double>> z,
                    std::span<const double> target) const {
  const auto H = transfer(theta);
  Var total = 0.0;
  for (std::size_t n = 0; n < z.size(); ++n) {
    const Var e = predict(theta, H, z[n]) - target[n];
    total = total + e * e;
  }
  return total / static_cast<double>(z.size());
}

std::vector<double> Regressor::key_omega0() const {
  std::vector<double> w;
  for (double u : params.slice("key_u")) w.push_back(softplus(u) + 1e-3);
  return w;
}

std::vector<double> Regressor::key_gamma() const {
  std::vector<double> g;
  for (double v : params.slice("key_v")) g.push_back(softplus(v));
  return g;
}

namespace {

struct RegressEval {
  double mse, corr;
};

RegressEval evaluate(const Regressor& model, const std::vector<std::vector<double>>& z,
                     const std::vector<double>& y) {
  const auto theta = lift_params(model.params, false);
  const auto H = model.transfer(theta);
  std::vector<double> p;
  for (const auto& zi : z) p.push_back(model.predict(theta, H, zi).v);
  double mse = 0.0, mp = 0.0, my = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    mse += square(p[n] - y[n]);
    mp += p[n];
    my += y[n];
  }
  const double N = static_cast<double>(y.size());
  mp /= N;
  my /= N;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t n = 0; n < y.size(); ++n) {
    sxy += (p[n] - mp) * (y[n] - my);
    sxx += square(p[n] - mp);
    syy += square(y[n] - my);
  }
  return {mse / N, sxx > 0.0 && syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0};
}

}  // namespace

RegressMetrics train_regressor(const RegressConfig& cfg, Rng& rng) {
  const auto start = std::chrono::steady_clock::now();
  cfg.validate();
  RegressMetrics m;
  m.seed = rng.seed();
  Rng data_rng = rng.split();
  const auto train = gen_regression(cfg, cfg.n_train, data_rng);
  const auto val = gen_regression(cfg, cfg.n_val, data_rng);
  std::vector<std::vector<double>> ztr, zva;
  std::vector<double> ytr, yva;
  for (const auto& s : train) {
    ztr.push_back(log_energy_features(s, cfg.freqs));
    ytr.push_back(s.target);
  }
  for (const auto& s : val) {
    zva.push_back(log_energy_features(s, cfg.freqs));
    yva.push_back(s.target);
  }
  const auto scaler = FeatureScaler::fit(ztr);
  for (auto& z : ztr) z = scaler.apply(z);
  for (auto& z : zva) z = scaler.apply(z);

  const double mean_tr = std::accumulate(ytr.begin(), ytr.end(), 0.0) / static_cast<double>(ytr.size());
  const double mean_va = std::accumulate(yva.begin(), yva.end(), 0.0) / static_cast<double>(yva.size());
  for (double y : yva) {
    m.baseline_mse += square(y - mean_tr);
    m.target_std += square(y - mean_va);
  }
  m.baseline_mse /= static_cast<double>(yva.size());
  m.target_std = std::sqrt(m.target_std / static_cast<double>(yva.size()));

  Regressor model(cfg, rng);
  const AdamWConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay, cfg.warmup_frac};
  AdamWState state;
  const std::size_t per_epoch = (cfg.n_train + cfg.batch - 1) / cfg.batch;
  const long total = static_cast<long>(per_epoch * cfg.epochs);
  long step = 0;
  std::vector<std::size_t> order(ztr.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> bz;
  std::vector<double> by;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle(order, rng);
    double sum = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch) {
      bz.clear();
      by.clear();
      for (std::size_t k = b0; k < std::min(order.size(), b0 + cfg.batch); ++k) {
        bz.push_back(ztr[order[k]]);
        by.push_back(ytr[order[k]]);
      }
      double l = 0.0;
      try {
        l = train_step(model.params, state, cosine_lr(cfg.lr, step++, total, cfg.warmup_frac), opt,
                       [&](const std::vector<Var>& theta) { return model.loss(theta, bz, by); });
      } catch (const PoisonedGradientError& e) {
        throw TrainingError("regressor diverged at epoch " + std::to_string(epoch) + " (seed " +
                            std::to_string(m.seed) + "): " + e.what());
      }
      if (!std::isfinite(l)) {
        throw TrainingError("regressor loss is not finite at epoch " + std::to_string(epoch) + " (seed " +
                            std::to_string(m.seed) + ")");
      }
      sum += l * static_cast<double>(bz.size());
    }
    m.train_loss.push_back(sum / static_cast<double>(ztr.size()));
    m.val_curve.push_back(evaluate(model, zva, yva).mse);
    m.epochs_run = epoch + 1;
  }
  const auto ev = evaluate(model, zva, yva);
  m.val_mse = ev.mse;
  m.rmse = std::sqrt(ev.mse);
  m.correlation = ev.corr;
  m.reduction = 1.0 - ev.mse / m.baseline_mse;
  const auto w0 = model.key_omega0();
  const auto g = model.key_gamma();
  std::vector<std::size_t> keys(w0.size());
  std::iota(keys.begin(), keys.end(), 0);
  std::sort(keys.begin(), keys.end(), [&](std::size_t a, std::size_t b) { return w0[a] < w0[b]; });
  for (std::size_t i : keys) {
    m.key_omega0.push_back(w0[i]);
    m.key_gamma.push_back(g[i]);
  }
  m.seconds = elapsed(start);
  return m;
}

// ---------------------------------------------------------------------------
// serialization

nlohmann::json to_json(const ClassifyMetrics& m) {
  return {{"untrained_val_accuracy", m.untrained_val_accuracy},
          {"val_accuracy", m.val_accuracy},
          {"final_val_accuracy", m.final_val_accuracy},
          {"best_epoch", m.best_epoch},
          {"epochs_run", m.epochs_run},
          {"seconds", m.seconds},
          {"train_loss", m.train_loss},
          {"val_accuracy_curve", m.val_curve},
          {"confusion", m.confusion},
          {"diagonal_ratio", m.diagonal_ratio},
          {"key_omega0", m.key_omega0},
          {"key_gamma", m.key_gamma},
          {"profile_omega", m.profile_omega},
          {"resonance_profile", m.profile},
          {"seed", m.seed}};
}

nlohmann::json to_json(const RegressMetrics& m) {
  return {{"baseline_mse", m.baseline_mse}, {"target_std", m.target_std}, {"val_mse", m.val_mse},
          {"rmse", m.rmse},                 {"correlation", m.correlation}, {"reduction", m.reduction},
          {"epochs_run", m.epochs_run},     {"seconds", m.seconds},       {"train_loss", m.train_loss},
          {"val_mse_curve", m.val_curve},   {"key_omega0", m.key_omega0}, {"key_gamma", m.key_gamma},
          {"seed", m.seed}};
}

nlohmann::json to_json(const ClassifyConfig& c) {
  return {{"M", c.M},
          {"L", c.L},
          {"T", c.T},
          {"poisson_rate", c.poisson_rate},
          {"amp_lo", c.amp_lo},
          {"amp_hi", c.amp_hi},
          {"noise", c.noise},
          {"omega_min", c.omega_min},
          {"d_omega", c.d_omega},
          {"d", c.d},
          {"J", c.J},
          {"hidden", c.hidden},
          {"keys", c.keys},
          {"n_train", c.n_train},
          {"n_val", c.n_val},
          {"epochs", c.epochs},
          {"batch", c.batch},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"warmup_frac", c.warmup_frac},
          {"embed_scale", c.embed_scale},
          {"ridge", c.ridge}};
}

nlohmann::json to_json(const RegressConfig& c) {
  return {{"freqs", c.freqs},
          {"keys", c.keys},
          {"T_obs", c.T_obs},
          {"T_future", c.T_future},
          {"gap_shape", c.gap_shape},
          {"gap_scale", c.gap_scale},
          {"noise", c.noise},
          {"amp_lo", c.amp_lo},
          {"amp_hi", c.amp_hi},
          {"min_components", c.min_components},
          {"max_components", c.max_components},
          {"n_train", c.n_train},
          {"n_val", c.n_val},
          {"epochs", c.epochs},
          {"batch", c.batch},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"warmup_frac", c.warmup_frac},
          {"key_omega_lo", c.key_omega_lo},
          {"key_omega_hi", c.key_omega_hi}};
}

ClassifyConfig classify_config_from_json(const nlohmann::json& j) {
  const auto b = overlay_config(to_json(ClassifyConfig{}), j, "classify config");
  ClassifyConfig c;
  c.M = b["M"];
  c.L = b["L"];
  c.T = b["T"];
  c.poisson_rate = b["poisson_rate"];
  c.amp_lo = b["amp_lo"];
  c.amp_hi = b["amp_hi"];
  c.noise = b["noise"];
  c.omega_min = b["omega_min"];
  c.d_omega = b["d_omega"];
  c.d = b["d"];
  c.J = b["J"];
  c.hidden = b["hidden"];
  c.keys = b["keys"];
  c.n_train = b["n_train"];
  c.n_val = b["n_val"];
  c.epochs = b["epochs"];
  c.batch = b["batch"];
  c.lr = b["lr"];
  c.weight_decay = b["weight_decay"];
  c.warmup_frac = b["warmup_frac"];
  c.embed_scale = b["embed_scale"];
  c.ridge = b["ridge"];
  c.validate();
  return c;
}

RegressConfig regress_config_from_json(const nlohmann::json& j) {
  const auto b = overlay_config(to_json(RegressConfig{}), j, "regress config");
  RegressConfig c;
  c.freqs = b["freqs"].get<std::vector<double>>();
  c.keys = b["keys"];
  c.T_obs = b["T_obs"];
  c.T_future = b["T_future"];
  c.gap_shape = b["gap_shape"];
  c.gap_scale = b["gap_scale"];
  c.noise = b["noise"];
  c.amp_lo = b["amp_lo"];
  c.amp_hi = b["amp_hi"];
  c.min_components = b["min_components"];
  c.max_components = b["max_components"];
  c.n_train = b["n_train"];
  c.n_val = b["n_val"];
  c.epochs = b["epochs"];
  c.batch = b["batch"];
  c.lr = b["lr"];
  c.weight_decay = b["weight_decay"];
  c.warmup_frac = b["warmup_frac"];
  c.key_omega_lo = b["key_omega_lo"];
  c.key_omega_hi = b["key_omega_hi"];
  c.validate();
  return c;
}

}  // namespace osc
