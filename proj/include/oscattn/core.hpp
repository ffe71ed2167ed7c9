#pragma once

// Shared contracts: oscillator parameters, damping regimes, time grids,
// the deterministic generator, error types and global tolerances.
//
// Every numeric routine in the library is a template over a scalar type T.
// T is either double or a derivative-carrying scalar (see autodiff.hpp); the
// routines only use +, -, *, /, exp, sin, cos, sinh, cosh, sqrt and pow on T,
// and branch on value_of(x).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace osc {

// ---------------------------------------------------------------------------
// errors

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ParameterError : Error { using Error::Error; };
struct OrderingError : Error { using Error::Error; };
struct RangeError : Error { using Error::Error; };
struct MagnitudeError : Error { using Error::Error; };
struct ResonanceError : Error { using Error::Error; };
struct CausalityError : Error { using Error::Error; };
struct WindowError : Error { using Error::Error; };
struct RankDeficiencyError : Error { using Error::Error; };
struct MaskError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct CapacityError : Error { using Error::Error; };

// ---------------------------------------------------------------------------
// tolerances

inline constexpr double kRegimeRelTol = 1e-9;
/// |omega_d * t| (or |sigma * t|) below which sin/sinh ratios use series.
inline constexpr double kSeriesSwitch = 1e-4;
/// sigma * t above which overdamped flows use paired exponentials.
inline constexpr double kPairedExpSwitch = 20.0;
inline constexpr double kPi = 3.14159265358979323846;

// ---------------------------------------------------------------------------
// scalar helpers

inline double value_of(double x) { return x; }

template <class T>
bool is_finite(const T& x) {
  return std::isfinite(value_of(x));
}

template <class T>
T square(const T& x) {
  return x * x;
}

// ---------------------------------------------------------------------------
// oscillator parameters

template <class T = double>
struct OscParams {
  T gamma{};   // damping coefficient [1/time], >= 0
  T omega0{};  // natural frequency [rad/time], > 0
};

template <class T>
void validate(const OscParams<T>& p) {
  const double g = value_of(p.gamma);
  const double w = value_of(p.omega0);
  if (!std::isfinite(g) || !std::isfinite(w) || g < 0.0 || w <= 0.0) {
    throw ParameterError("invalid oscillator parameters: gamma=" + std::to_string(g) +
                         " omega0=" + std::to_string(w));
  }
}

template <class T = double>
struct Underdamped {
  T omega_d;
};
struct Critical {};
template <class T = double>
struct Overdamped {
  T sigma;
};

template <class T = double>
using DampingRegime = std::variant<Underdamped<T>, Critical, Overdamped<T>>;

/// Critical when |gamma - omega0| <= rel_tol * max(gamma, omega0, 1).
template <class T>
DampingRegime<T> classify_regime(const OscParams<T>& p, double rel_tol = kRegimeRelTol) {
  validate(p);
  if (!(rel_tol > 0.0 && rel_tol <= 1e-3)) throw RangeError("rel_tol must lie in (0, 1e-3]");
  using std::sqrt;
  const double g = value_of(p.gamma);
  const double w = value_of(p.omega0);
  if (std::abs(g - w) <= rel_tol * std::max({g, w, 1.0})) return Critical{};
  // (w - g)(w + g) keeps the difference accurate close to the boundary.
  if (g < w) return Underdamped<T>{sqrt((p.omega0 - p.gamma) * (p.omega0 + p.gamma))};
  return Overdamped<T>{sqrt((p.gamma - p.omega0) * (p.gamma + p.omega0))};
}

// ---------------------------------------------------------------------------
// state and time

template <class T = double>
struct State2 {
  T x{};  // position
  T p{};  // velocity
};

/// Strictly increasing observation instants, normalized to [0, 1].
struct TimeGrid {
  std::vector<double> times;

  std::size_t size() const { return times.size(); }
  double operator[](std::size_t i) const { return times[i]; }
};

/// Affine map of [t_1, t_N] onto [0, 1]; a single instant maps to 0.
TimeGrid normalize_times(std::span<const double> raw);

// ---------------------------------------------------------------------------
// deterministic generator

/// SplitMix64 counter generator. No global state; split() derives an
/// independent stream for a worker.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), counter_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 bits.
  double next_double();
  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal(double mean = 0.0, double stddev = 1.0);
  double exponential(double rate);
  /// Marsaglia-Tsang; shape > 0, scale > 0.
  double gamma(double shape, double scale);
  Rng split();

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

/// Free-function form of Rng::uniform.
inline double rng_next_uniform(Rng& rng, double lo, double hi) { return rng.uniform(lo, hi); }

}  // namespace osc
