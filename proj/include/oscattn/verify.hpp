#pragma once

// Randomized property suites with pinned tolerances. Each suite returns a
// pass/fail summary and, on failure, the first failing case as JSON
// (inputs, expected, got).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "oscattn/core.hpp"

namespace osc {

struct SuiteResult {
  std::string name;
  bool pass = true;
  std::size_t cases = 0;
  double worst = 0.0;       // worst measured error, in the suite's own metric
  double tolerance = 0.0;   // the bound `worst` is held to
  double seconds = 0.0;
  std::string detail;
  nlohmann::json failure;   // null when passing
};

/// Named tolerances and their defaults:
///   kernel_oracle      1e-9   |closed - quadrature| / (1 + |closed|)
///   propagator_laws    1e-10  semigroup (absolute) and determinant (relative)
///   ode_residual       1e-4   FD residual / (1 + |x| + |F|)
///   anchoring_value    1e-10  particular position and velocity at the anchor
///   anchoring_slope    1e-7   FD slope of the particular position there
///   attention_logit    1e-6   error / window average of sum_c |q_c k_c|
///   hat_epsilon        0.05   key approximation target
///   softmax_slack      1e-12  additive slack on the l_inf to l_1 bound
///   perturbation_band  0.1    relative band around a ratio of 2
///   gradient           1e-4   |g - fd| / max(|g|, |fd|, 1e-6)
///   baseline           1e-6   max |closed - RK4| of layer outputs at S = 4096
std::map<std::string, double> default_tolerances();

struct VerifyConfig {
  std::uint64_t seed = 1;
  std::map<std::string, double> tolerances = default_tolerances();

  /// Applies overrides; the key "all" sets every tolerance. Unknown names or
  /// non-positive values throw ParameterError.
  void override_tolerances(const std::map<std::string, double>& o);
  double tol(const std::string& name) const { return tolerances.at(name); }
};

SuiteResult suite_kernel_oracle(const VerifyConfig& cfg, std::size_t per_kind = 1000);
SuiteResult suite_propagator(const VerifyConfig& cfg, std::size_t cases = 300);
SuiteResult suite_anchoring(const VerifyConfig& cfg, std::size_t cases = 300);
SuiteResult suite_attention(const VerifyConfig& cfg, std::size_t cases = 300);
SuiteResult suite_hat(const VerifyConfig& cfg);
SuiteResult suite_softmax(const VerifyConfig& cfg, std::size_t pairs = 10000);
SuiteResult suite_perturbation(const VerifyConfig& cfg, std::size_t banks = 5);
SuiteResult suite_gradients(const VerifyConfig& cfg, std::size_t seeds = 5);
SuiteResult suite_baseline(const VerifyConfig& cfg, int S = 4096);

/// All suites above in that order.
std::vector<SuiteResult> run_verify(const VerifyConfig& cfg);

nlohmann::json to_json(const SuiteResult& r, bool with_time = false);

}  // namespace osc
