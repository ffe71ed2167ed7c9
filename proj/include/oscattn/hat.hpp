#pragma once

// Harmonic approximation certificates. A continuous key on [t_i, b] is held
// constant on [a, t_i], approximated by a trigonometric polynomial on the
// half-range grid w_n = n pi / L (L = b - a), re-anchored at t_i and
// realized exactly by a shared bank of undamped oscillators whose positions
// are summed. The certificate measures key, logit and softmax gaps against
// the approximation bounds, optionally with a small damping on every mode.

#include <cstddef>
#include <functional>
#include <vector>

#include "oscattn/core.hpp"
#include "oscattn/query.hpp"
#include <json.hpp>

namespace osc {

/// K_N(theta) = (1/(N+1)) (sin((N+1) theta/2) / sin(theta/2))^2, N+1 at 0.
double fejer_kernel(std::size_t N, double theta);

/// c0 + sum_n c_n cos(w_n (t - base)) + s_n sin(w_n (t - base)), w_n = n pi / L.
struct TrigPolynomial {
  double base = 0.0;
  double L = 1.0;
  std::vector<double> c0;
  std::vector<std::vector<double>> c, s;  // [n - 1][coordinate]

  std::size_t degree() const { return c.size(); }
  std::size_t dim() const { return c0.size(); }
  double omega(std::size_t n) const { return static_cast<double>(n) * kPi / L; }
  std::vector<double> eval(double t) const;
};

/// Vector samples at a + k (b - a) / (n - 1), k = 0..n-1.
struct SampledFunction {
  double a = 0.0, b = 1.0;
  std::vector<std::vector<double>> values;
};

inline constexpr std::size_t kMinFejerSamples = 4096;

/// Fejer mean of order N of the even 2L-periodic extension, with cosine
/// coefficients from the trapezoid rule on the samples.
TrigPolynomial fejer_approx(const SampledFunction& f, std::size_t N);
/// Fourier partial sum of the same extension (unit weights).
TrigPolynomial fourier_partial_sum(const SampledFunction& f, std::size_t N);

/// Same polynomial written in powers of (t - t_i).
TrigPolynomial phase_shift(const TrigPolynomial& p, double t_i);

/// Modes n = 0..M on the grid n pi / L, one oscillator per mode and
/// coordinate; z0[n][c] is the (position, velocity) at the anchor.
struct OscillatorBank {
  double anchor = 0.0;
  double L = 1.0;
  std::size_t d = 0;
  std::vector<double> gamma;                     // per mode
  std::vector<std::vector<State2<double>>> z0;   // [n][c]

  std::size_t modes() const { return z0.empty() ? 0 : z0.size() - 1; }
  double omega(std::size_t n) const { return static_cast<double>(n) * kPi / L; }
};

/// Undamped bank whose readout equals p (anchored at p.base) for t >= base.
OscillatorBank realize_bank(const TrigPolynomial& p, std::size_t M);
/// Sum over modes of each coordinate's position at t >= anchor.
std::vector<double> bank_readout(const OscillatorBank& bank, double t);

struct PerturbationReport {
  double gamma_max = 0.0;
  double sup_difference = 0.0;  // sup_t ||readout_gamma - readout_0||_2
};

/// Compares the bank with every gamma_n set to gamma_max against the same
/// initial states with no damping, on `points` instants of [anchor, t_end].
PerturbationReport damping_perturbation(const OscillatorBank& bank, double gamma_max, double t_end,
                                        std::size_t points = 2001);

using KeyFunction = std::function<std::vector<double>(double)>;

struct HatKeys {
  double a = 0.0, b = 1.0;
  std::vector<double> anchors;   // increasing, in [a, b)
  std::vector<KeyFunction> keys;  // key i is read on [anchors[i], b]
  std::size_t dim = 1;
  bool hold_before_anchor = true;  // false: keys are already continuous on [a, b]
};

struct HatOptions {
  double epsilon = 0.05;
  double gamma = 0.0;            // damping applied to every realized mode
  std::size_t n_start = 8, n_max = 256;
  std::size_t fit_intervals = 8192;
  std::size_t check_points = 4097;
  std::size_t quad_intervals = 512;  // Simpson intervals per logit window
};

struct HatCertificate {
  double epsilon = 0.0, gamma = 0.0;
  std::size_t N_used = 0;
  bool capacity_exhausted = false;
  std::vector<double> per_key_sup_error;
  double q_sup = 0.0;
  double max_logit_gap = 0.0;
  double max_l1_gap = 0.0;
  bool keys_ok = false, logits_ok = false, l1_ok = false, chain_ok = false;
  bool bounds_ok = false;
  double seconds = 0.0;
};

HatCertificate hat_certificate(const QueryExpansion<double>& q, const HatKeys& keys, const HatOptions& opts = {});

nlohmann::json to_json(const HatCertificate& c);

/// Random triangle-wave keys (per coordinate: amplitude, period, phase) and
/// a random smooth query on [a, b].
struct HatProblem {
  QueryExpansion<double> q;
  HatKeys keys;
};
HatProblem triangle_problem(std::size_t n_keys, std::size_t dim, double a, double b, Rng& rng);

}  // namespace osc
