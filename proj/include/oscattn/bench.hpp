#pragma once

// Wall-clock comparison of the closed-form layer against the RK4 baseline.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "oscattn/oracles.hpp"

namespace osc {

struct BenchRow {
  std::size_t N = 0, d = 0, S = 0, J = 0;
  double t_closed_ms = 0.0;
  double t_numeric_ms = 0.0;
  double speedup = 0.0;          // t_numeric / t_closed
  double predicted_ratio = 0.0;  // J / (S d)
  std::size_t closed_scratch_bytes = 0;
  std::size_t numeric_path_bytes = 0;
  std::size_t inner_closed = 1, inner_numeric = 1;
};

struct BenchSweep {
  std::vector<std::size_t> N{32, 64}, d{32, 64}, S{20, 40, 80}, J{8};
  std::size_t repeats = 5, warmup = 2;
  std::size_t heads = 1;
  BaselineField::Kind field = BaselineField::Kind::dense_tanh;
  double min_sample_ms = 2.0;  // shorter samples repeat the call inside the timer
  std::uint64_t seed = 1;

  void validate() const;
};

/// One row per element of N x d x S x J. Both layers see identical tokens,
/// times and parameters; rows are ordered with S varying fastest.
std::vector<BenchRow> run_bench(const BenchSweep& sweep);

/// Median milliseconds per call of f over `repeats` samples after `warmup`
/// discarded calls. When one call is shorter than min_ms, each sample times a
/// batch of calls, doubled until it lasts min_ms; *inner receives the batch size.
template <class F>
double time_median_ms(F&& f, std::size_t repeats, std::size_t warmup, double min_ms, std::size_t* inner = nullptr) {
  using clock = std::chrono::steady_clock;
  auto run = [&](std::size_t n) {
    const auto t0 = clock::now();
    for (std::size_t k = 0; k < n; ++k) f();
    return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  };
  for (std::size_t w = 0; w < warmup; ++w) run(1);
  std::size_t n = 1;
  double first = run(1);
  while (first < min_ms && n < (std::size_t{1} << 30)) {
    n *= 2;
    first = run(n);
  }
  std::vector<double> samples{first / static_cast<double>(n)};
  while (samples.size() < repeats) samples.push_back(run(n) / static_cast<double>(n));
  std::sort(samples.begin(), samples.end());
  if (inner) *inner = n;
  const std::size_t m = samples.size();
  return m % 2 ? samples[m / 2] : 0.5 * (samples[m / 2 - 1] + samples[m / 2]);
}

std::string bench_csv(const std::vector<BenchRow>& rows);
nlohmann::json bench_json(const std::vector<BenchRow>& rows);
/// Speedup against S, one polyline per (N, d, J).
std::string bench_svg(const std::vector<BenchRow>& rows);

/// Writes bench.csv and bench.json (and bench.svg when asked) under dir,
/// creating it first. Throws IoError on failure.
void emit_report(const std::vector<BenchRow>& rows, const std::filesystem::path& dir, bool svg);

struct IoError : Error { using Error::Error; };

/// The seed is not serialized; callers set it from the run configuration.
nlohmann::json to_json(const BenchSweep& s);
BenchSweep bench_sweep_from_json(const nlohmann::json& j);

}  // namespace osc
