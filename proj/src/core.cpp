#include "oscattn/core.hpp"

#include <algorithm>

namespace osc {

TimeGrid normalize_times(std::span<const double> raw) {
  if (raw.empty()) throw OrderingError("normalize_times: empty input");
  for (double t : raw) {
    if (!std::isfinite(t)) throw OrderingError("normalize_times: non-finite instant");
  }
  for (std::size_t i = 1; i < raw.size(); ++i) {
    if (!(raw[i] > raw[i - 1])) throw OrderingError("normalize_times: instants must be strictly increasing");
  }
  TimeGrid grid;
  grid.times.resize(raw.size());
  if (raw.size() == 1) {
    grid.times[0] = 0.0;
    return grid;
  }
  const double t0 = raw.front();
  const double span = raw.back() - t0;
  for (std::size_t i = 0; i < raw.size(); ++i) grid.times[i] = (raw[i] - t0) / span;
  grid.times.back() = 1.0;
  return grid;
}

std::uint64_t Rng::next_u64() {
  std::uint64_t z = (counter_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::uniform(double lo, double hi) {
  if (!(lo < hi)) throw RangeError("uniform: require lo < hi");
  const double v = lo + (hi - lo) * next_double();
  return v < hi ? v : std::nextafter(hi, lo);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw RangeError("below: n must be positive");
  // Lemire-style rejection keeps the draw unbiased.
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % n);
  std::uint64_t r;
  do {
    r = next_u64();
  } while (r >= limit);
  return r % n;
}

double Rng::normal(double mean, double stddev) {
  // Box-Muller; one draw per call keeps the stream position simple.
  double u1 = next_double();
  while (u1 <= 0.0) u1 = next_double();
  const double u2 = next_double();
  return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

double Rng::exponential(double rate) {
  if (!(rate > 0.0)) throw RangeError("exponential: rate must be positive");
  return -std::log1p(-next_double()) / rate;
}

double Rng::gamma(double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw RangeError("gamma: shape and scale must be positive");
  if (shape < 1.0) {
    const double u = next_double();
    return gamma(shape + 1.0, scale) * std::pow(std::max(u, 1e-300), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = next_double();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(std::max(u, 1e-300)) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
  }
}

Rng Rng::split() { return Rng(next_u64()); }

}  // namespace osc
