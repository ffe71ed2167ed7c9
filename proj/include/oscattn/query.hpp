#pragma once

// Query trajectories as a finite cos/sin expansion on a shared frequency
// grid (plus an optional constant column):
//
//   q(t) = dc + sum_j A_j cos(w_j t) + B_j sin(w_j t)

#include <cstddef>
#include <span>
#include <vector>

#include "oscattn/core.hpp"
#include "oscattn/kernels.hpp"

namespace osc {

struct FrequencyGrid {
  std::vector<double> freqs;
  bool dc = true;

  std::size_t size() const { return freqs.size(); }
  std::size_t columns() const { return 2 * freqs.size() + (dc ? 1 : 0); }
};

void validate(const FrequencyGrid& g);

/// J frequencies log-spaced on [lo, hi].
FrequencyGrid log_grid(std::size_t J, double lo, double hi, bool dc = true);

/// Default collocation grid for normalized time: 2 pi / span up to pi * n_max.
/// When pi * n_max does not exceed the lower end the upper end is twice it.
FrequencyGrid default_grid(std::size_t n_max, std::size_t J = 8, double span = 1.0);

template <class T = double>
struct QueryExpansion {
  FrequencyGrid grid;
  std::vector<std::vector<T>> A, B;  // [j][c]
  std::vector<T> dc;                 // empty when the grid has no DC column

  std::size_t dim() const { return A.empty() ? dc.size() : A.front().size(); }
};

template <class T = double>
struct RotatedQuery {
  std::vector<double> freqs;
  std::vector<std::vector<T>> A_tilde, B_tilde;
  std::vector<T> dc;
  double anchor = 0.0;

  std::size_t dim() const { return A_tilde.empty() ? dc.size() : A_tilde.front().size(); }
};

inline constexpr double kDefaultRidge = 1e-6;
inline constexpr double kMaxCondition = 1e12;

/// Linear map from samples to coefficients for a fixed set of instants:
/// coeffs = H * samples, H = (X^T X + ridge I)^{-1} X^T. Depends only on the
/// instants and the grid, so it is shared by every channel and head.
struct QueryHat {
  FrequencyGrid grid;
  std::size_t samples = 0;
  std::vector<double> H;  // columns() x samples, row-major
  double ridge_used = 0.0;
};

QueryHat make_query_hat(std::span<const double> times, const FrequencyGrid& grid, double ridge = kDefaultRidge);

QueryExpansion<double> apply_query_hat(const QueryHat& hat, const std::vector<std::vector<double>>& samples);

/// Ridge least-squares fit of samples[l] (one vector per instant).
QueryExpansion<double> fit_query(std::span<const double> times, const std::vector<std::vector<double>>& samples,
                                 const FrequencyGrid& grid, double ridge = kDefaultRidge);

template <class T>
std::vector<T> eval_query(const QueryExpansion<T>& q, double t) {
  std::vector<T> out = q.dc.empty() ? std::vector<T>(q.dim(), T(0.0)) : q.dc;
  for (std::size_t j = 0; j < q.grid.size(); ++j) {
    const double cs = std::cos(q.grid.freqs[j] * t);
    const double sn = std::sin(q.grid.freqs[j] * t);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = out[c] + q.A[j][c] * cs + q.B[j][c] * sn;
  }
  return out;
}

/// Re-express q in local time s = t - anchor.
template <class T>
RotatedQuery<T> rotate_query(const QueryExpansion<T>& q, double anchor) {
  RotatedQuery<T> r;
  r.freqs = q.grid.freqs;
  r.dc = q.dc;
  r.anchor = anchor;
  r.A_tilde.resize(q.grid.size());
  r.B_tilde.resize(q.grid.size());
  for (std::size_t j = 0; j < q.grid.size(); ++j) {
    const double cs = std::cos(q.grid.freqs[j] * anchor);
    const double sn = std::sin(q.grid.freqs[j] * anchor);
    const std::size_t d = q.A[j].size();
    r.A_tilde[j].resize(d);
    r.B_tilde[j].resize(d);
    for (std::size_t c = 0; c < d; ++c) {
      r.A_tilde[j][c] = q.A[j][c] * cs + q.B[j][c] * sn;
      r.B_tilde[j][c] = q.B[j][c] * cs - q.A[j][c] * sn;
    }
  }
  return r;
}

template <class T>
std::vector<T> eval_rotated(const RotatedQuery<T>& r, double s) {
  std::vector<T> out = r.dc.empty() ? std::vector<T>(r.dim(), T(0.0)) : r.dc;
  for (std::size_t j = 0; j < r.freqs.size(); ++j) {
    const double cs = std::cos(r.freqs[j] * s);
    const double sn = std::sin(r.freqs[j] * s);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] = out[c] + r.A_tilde[j][c] * cs + r.B_tilde[j][c] * sn;
  }
  return out;
}

/// (1/(t - t_i)) * integral of q over [t_i, t].
template <class T>
std::vector<T> mean_query(const QueryExpansion<T>& q, double t_i, double t) {
  if (!(t > t_i)) throw WindowError("mean_query: require t > t_i");
  const double delta = t - t_i;
  const auto r = rotate_query(q, t_i);
  std::vector<T> out = r.dc.empty() ? std::vector<T>(r.dim(), T(0.0)) : r.dc;
  for (std::size_t j = 0; j < r.freqs.size(); ++j) {
    const auto [C, S] = kernel_CS(delta, 0.0, r.freqs[j]);
    for (std::size_t c = 0; c < out.size(); ++c) {
      out[c] = out[c] + (r.A_tilde[j][c] * C + r.B_tilde[j][c] * S) / delta;
    }
  }
  return out;
}

}  // namespace osc
