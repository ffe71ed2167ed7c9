#include "oscattn/query.hpp"

#include <algorithm>
#include <cmath>

namespace osc {

namespace {

// Numerically singular when |R_jj| falls below this fraction of max |R_ii|.
constexpr double kSingularPivot = 1e-7;

// Householder QR of the m x p matrix M (row-major, m >= p), applied in the
// same sweep to the m x k right-hand block E.
struct QrResult {
  std::vector<double> R;  // p x p upper triangle, row-major
  double min_diag = 0.0;
  double max_diag = 0.0;
};

QrResult householder(std::vector<double>& M, std::size_t m, std::size_t p, std::vector<double>& E, std::size_t k) {
  std::vector<double> v(m);
  for (std::size_t j = 0; j < p; ++j) {
    double norm = 0.0;
    for (std::size_t i = j; i < m; ++i) norm += M[i * p + j] * M[i * p + j];
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;
    const double alpha = M[j * p + j] > 0 ? -norm : norm;
    for (std::size_t i = j; i < m; ++i) v[i] = M[i * p + j];
    v[j] -= alpha;
    double vv = 0.0;
    for (std::size_t i = j; i < m; ++i) vv += v[i] * v[i];
    if (vv == 0.0) continue;
    for (std::size_t c = j; c < p; ++c) {
      double dot = 0.0;
      for (std::size_t i = j; i < m; ++i) dot += v[i] * M[i * p + c];
      const double f = 2.0 * dot / vv;
      for (std::size_t i = j; i < m; ++i) M[i * p + c] -= f * v[i];
    }
    for (std::size_t c = 0; c < k; ++c) {
      double dot = 0.0;
      for (std::size_t i = j; i < m; ++i) dot += v[i] * E[i * k + c];
      const double f = 2.0 * dot / vv;
      for (std::size_t i = j; i < m; ++i) E[i * k + c] -= f * v[i];
    }
  }
  QrResult r;
  r.R.assign(p * p, 0.0);
  r.min_diag = INFINITY;
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) r.R[a * p + b] = M[a * p + b];
    const double d = std::abs(M[a * p + a]);
    r.min_diag = std::min(r.min_diag, d);
    r.max_diag = std::max(r.max_diag, d);
  }
  return r;
}

// Design row: [dc?, cos w_1 t, ..., cos w_J t, sin w_1 t, ..., sin w_J t].
void design_row(const FrequencyGrid& g, double t, std::span<double> row) {
  std::size_t k = 0;
  if (g.dc) row[k++] = 1.0;
  for (double w : g.freqs) row[k++] = std::cos(w * t);
  for (double w : g.freqs) row[k++] = std::sin(w * t);
}

}  // namespace

void validate(const FrequencyGrid& g) {
  for (std::size_t j = 0; j < g.freqs.size(); ++j) {
    if (!(g.freqs[j] > 0.0) || !std::isfinite(g.freqs[j])) throw ParameterError("grid: frequencies must be > 0");
    if (j > 0 && !(g.freqs[j] > g.freqs[j - 1])) throw OrderingError("grid: frequencies must increase");
  }
  if (g.freqs.empty() && !g.dc) throw ParameterError("grid: no columns");
}

FrequencyGrid log_grid(std::size_t J, double lo, double hi, bool dc) {
  if (!(lo > 0.0) || !(hi > lo)) throw RangeError("log_grid: require 0 < lo < hi");
  FrequencyGrid g;
  g.dc = dc;
  if (J == 1) {
    g.freqs.push_back(lo);
    return g;
  }
  const double r = std::log(hi / lo);
  for (std::size_t j = 0; j < J; ++j) g.freqs.push_back(lo * std::exp(r * j / (J - 1)));
  g.freqs.back() = hi;
  return g;
}

FrequencyGrid default_grid(std::size_t n_max, std::size_t J, double span) {
  if (!(span > 0.0)) throw RangeError("default_grid: span must be positive");
  const double lo = 2.0 * kPi / span;
  double hi = kPi * static_cast<double>(n_max);
  if (!(hi > lo)) hi = 2.0 * lo;
  return log_grid(J, lo, hi, true);
}

QueryHat make_query_hat(std::span<const double> times, const FrequencyGrid& grid, double ridge) {
  validate(grid);
  if (times.empty()) throw ShapeError("fit_query: need at least one sample");
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw RangeError("fit_query: ridge must be >= 0");
  const std::size_t n = times.size();
  const std::size_t p = grid.columns();
  std::vector<double> X(n * p);
  for (std::size_t l = 0; l < n; ++l) design_row(grid, times[l], std::span<double>(X.data() + l * p, p));
  // Least squares on [X; sqrt(ridge) I] keeps the conditioning of X rather
  // than of X^T X.
  double lam = ridge;
  for (int attempt = 0; attempt < 40; ++attempt) {
    const std::size_t m = n + p;
    std::vector<double> M(m * p, 0.0);
    std::copy(X.begin(), X.end(), M.begin());
    const double root = std::sqrt(lam);
    for (std::size_t a = 0; a < p; ++a) M[(n + a) * p + a] = root;
    std::vector<double> E(m * n, 0.0);
    for (std::size_t l = 0; l < n; ++l) E[l * n + l] = 1.0;
    const auto qr = householder(M, m, p, E, n);
    const bool singular = !(qr.min_diag > kSingularPivot * qr.max_diag);
    if (singular && lam == 0.0) throw RankDeficiencyError("fit_query: singular least-squares system; raise the ridge");
    const double cond = singular ? INFINITY : square(qr.max_diag / qr.min_diag);
    if (cond > kMaxCondition) {
      lam = std::max(lam, 1e-8) * 10.0;
      continue;
    }
    QueryHat hat;
    hat.grid = grid;
    hat.samples = n;
    hat.ridge_used = lam;
    hat.H.assign(p * n, 0.0);
    // Back substitution R H = (Q^T E)[0:p].
    for (std::size_t l = 0; l < n; ++l) {
      for (std::size_t a = p; a-- > 0;) {
        double s = E[a * n + l];
        for (std::size_t b = a + 1; b < p; ++b) s -= qr.R[a * p + b] * hat.H[b * n + l];
        hat.H[a * n + l] = s / qr.R[a * p + a];
      }
    }
    return hat;
  }
  throw RankDeficiencyError("fit_query: could not regularize the fit");
}

QueryExpansion<double> apply_query_hat(const QueryHat& hat, const std::vector<std::vector<double>>& samples) {
  if (samples.size() != hat.samples) throw ShapeError("fit_query: sample count mismatch");
  const std::size_t d = samples.front().size();
  for (const auto& s : samples) {
    if (s.size() != d) throw ShapeError("fit_query: ragged samples");
  }
  const std::size_t n = hat.samples;
  const std::size_t J = hat.grid.size();
  std::vector<std::vector<double>> coef(hat.grid.columns(), std::vector<double>(d, 0.0));
  for (std::size_t a = 0; a < coef.size(); ++a) {
    for (std::size_t l = 0; l < n; ++l) {
      const double h = hat.H[a * n + l];
      for (std::size_t c = 0; c < d; ++c) coef[a][c] += h * samples[l][c];
    }
  }
  QueryExpansion<double> q;
  q.grid = hat.grid;
  std::size_t k = 0;
  if (hat.grid.dc) q.dc = coef[k++];
  for (std::size_t j = 0; j < J; ++j) q.A.push_back(coef[k++]);
  for (std::size_t j = 0; j < J; ++j) q.B.push_back(coef[k++]);
  return q;
}

QueryExpansion<double> fit_query(std::span<const double> times, const std::vector<std::vector<double>>& samples,
                                 const FrequencyGrid& grid, double ridge) {
  if (samples.size() != times.size()) throw ShapeError("fit_query: one sample per instant required");
  return apply_query_hat(make_query_hat(times, grid, ridge), samples);
}

}  // namespace osc
