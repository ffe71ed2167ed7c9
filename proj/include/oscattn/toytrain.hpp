#pragma once

// Two small end-to-end experiments on synthetic irregular series.
//
// Classification: a single sinusoid with one of M frequencies, sampled at
// Poisson instants with random phase and noise. Tokens get a query embedding
// and a drive embedding; both are fitted on the frequency grid, and a bank of
// learned oscillator keys is driven by the fitted drive. Each key's logit is the closed-form window
// average of <q, k_i>, so keys resonate with the frequencies they are tuned
// to. The attended value feeds a two-layer MLP.
//
// Regression: forecast y(T_future) of a sum of cosines from log-energy
// features of the observed window; logits are transfer-function magnitudes
// weighted by a softplus query spectrum, and the prediction is a softmax
// blend of learned scalar values.

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "oscattn/attention.hpp"
#include "oscattn/autodiff.hpp"
#include "oscattn/optim.hpp"

namespace osc {

struct TrainingError : Error { using Error::Error; };

/// Named slices of one flat parameter vector.
struct ParamSet {
  struct Group {
    std::string name;
    std::size_t offset = 0, size = 0;
  };
  std::vector<double> values;
  std::vector<Group> groups;

  std::size_t add(const std::string& name, std::size_t size);
  const Group& group(const std::string& name) const;
  std::span<double> slice(const std::string& name);
  std::span<const double> slice(const std::string& name) const;
};

/// Parameters as Vars on the active tape (or constants when `record` is false).
std::vector<ad::Var> lift_params(const ParamSet& p, bool record);

// ---------------------------------------------------------------------------
// classification

struct ClassifyConfig {
  std::size_t M = 8;       // classes and signal frequencies
  std::size_t L = 32;      // instants per sequence
  double T = 5.0;
  double poisson_rate = 6.0;
  double amp_lo = 0.8, amp_hi = 1.2;
  double noise = 0.05;
  double omega_min = 2.0 * kPi * 0.5;
  double d_omega = 2.0 * kPi * 0.1;
  std::size_t d = 32;      // embedding width
  std::size_t J = 8;       // query modes, a subset of the signal frequencies
  std::size_t hidden = 64;
  std::size_t keys = 0;    // 0 means M
  std::size_t n_train = 5000, n_val = 1000;
  std::size_t epochs = 40, batch = 128;
  double lr = 1e-3, weight_decay = 0.01, warmup_frac = 0.05;
  double embed_scale = 5.0;
  double ridge = 1e-6;

  std::size_t key_count() const { return keys == 0 ? M : keys; }
  void validate() const;
};

struct ClassSequence {
  std::vector<double> t;
  std::vector<std::array<double, 2>> x;
  int label = 0;
};

std::vector<double> class_frequencies(const ClassifyConfig& cfg);
std::vector<double> query_frequencies(const ClassifyConfig& cfg);

std::vector<ClassSequence> gen_classification(const ClassifyConfig& cfg, std::size_t n, Rng& rng);

class Classifier {
 public:
  Classifier(const ClassifyConfig& cfg, Rng& rng);

  /// Per-sequence reduction: the query hat applied to the raw observations
  /// (columns x 2) and to the all-ones vector.
  struct Prepared {
    std::vector<double> P;
    std::vector<double> s;
    int label = 0;
  };
  Prepared prepare(const ClassSequence& seq) const;

  /// Kernel tables K_i[a][b]: window average of query column a against key i
  /// driven by column b, from rest at t = 0.
  std::vector<std::vector<ad::Var>> key_kernels(const std::vector<ad::Var>& theta) const;

  struct Output {
    std::vector<ad::Var> logits;
    std::vector<ad::Var> attention;
  };
  Output forward(const std::vector<ad::Var>& theta, const std::vector<std::vector<ad::Var>>& kernels,
                 const Prepared& x) const;

  /// Mean cross-entropy over a batch.
  ad::Var loss(const std::vector<ad::Var>& theta, std::span<const Prepared> batch) const;

  std::vector<double> key_omega0() const;
  std::vector<double> key_gamma() const;

  const ClassifyConfig& config() const { return cfg_; }
  ParamSet params;

 private:
  ClassifyConfig cfg_;
  FrequencyGrid grid_;
  std::vector<double> drive_;  // drive column b: frequency
  std::vector<WindowTables> tables_;  // [a * 2J + b]
};

struct ClassifyMetrics {
  double untrained_val_accuracy = 0.0;
  double val_accuracy = 0.0;    // best epoch
  double final_val_accuracy = 0.0;
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
  double seconds = 0.0;
  std::vector<double> train_loss, val_curve;
  std::vector<std::vector<double>> confusion;  // rows: true class, columns: keys by ascending omega0
  double diagonal_ratio = 0.0;                 // mean diagonal mass over uniform 1/K
  std::vector<double> key_omega0, key_gamma;   // ascending omega0
  std::vector<double> profile_omega;
  std::vector<std::vector<double>> profile;    // |H_i(omega)| per key
  std::uint64_t seed = 0;
};

double classify_accuracy(const Classifier& model, std::span<const Classifier::Prepared> data,
                         std::vector<std::vector<double>>* confusion = nullptr);

ClassifyMetrics train_classifier(const ClassifyConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// regression

struct RegressConfig {
  std::vector<double> freqs{2.0, 3.2, 4.4, 5.6, 6.0, 7.2, 8.0, 9.0};
  std::size_t keys = 8;
  double T_obs = 5.0;
  double T_future = 7.0;
  double gap_shape = 2.0, gap_scale = 0.05;
  double noise = 0.1;
  double amp_lo = 0.5, amp_hi = 1.5;
  std::size_t min_components = 1, max_components = 3;
  std::size_t n_train = 2000, n_val = 400;
  std::size_t epochs = 200, batch = 64;
  double lr = 1e-2, weight_decay = 0.01, warmup_frac = 0.05;
  double key_omega_lo = 1.0, key_omega_hi = 10.0;

  void validate() const;
};

struct RegressSample {
  std::vector<double> t, y;
  double target = 0.0;
};

std::vector<RegressSample> gen_regression(const RegressConfig& cfg, std::size_t n, Rng& rng);

/// log(1 + A_j^2 + B_j^2) with A_j, B_j the trapezoid cosine/sine
/// coefficients (2/T) integral y(t) {cos, sin}(w_j t) dt over [t_1, t_N].
std::vector<double> log_energy_features(const RegressSample& s, const std::vector<double>& freqs);

class Regressor {
 public:
  Regressor(const RegressConfig& cfg, Rng& rng);

  /// H[i][j] = |H_i(w_j)| from the current key parameters.
  std::vector<std::vector<ad::Var>> transfer(const std::vector<ad::Var>& theta) const;
  ad::Var predict(const std::vector<ad::Var>& theta, const std::vector<std::vector<ad::Var>>& H,
                  std::span<const double> z, std::vector<ad::Var>* weights = nullptr) const;
  /// Mean squared error over standardized features z[n] and targets.
  ad::Var loss(const std::vector<ad::Var>& theta, std::span<const std::vector<double>> z,
               std::span<const double> target) const;

  std::vector<double> key_omega0() const;
  std::vector<double> key_gamma() const;
  const RegressConfig& config() const { return cfg_; }
  ParamSet params;

 private:
  RegressConfig cfg_;
};

struct RegressMetrics {
  double baseline_mse = 0.0;
  double target_std = 0.0;
  double val_mse = 0.0;
  double rmse = 0.0;
  double correlation = 0.0;
  double reduction = 0.0;  // 1 - val_mse / baseline_mse
  std::size_t epochs_run = 0;
  double seconds = 0.0;
  std::vector<double> train_loss, val_curve;
  std::vector<double> key_omega0, key_gamma;
  std::uint64_t seed = 0;
};

/// Standardizes features with training-set statistics.
struct FeatureScaler {
  std::vector<double> mean, sd;
  static FeatureScaler fit(const std::vector<std::vector<double>>& x);
  std::vector<double> apply(const std::vector<double>& x) const;
};

RegressMetrics train_regressor(const RegressConfig& cfg, Rng& rng);

/// |H(w)| = 1 / sqrt((w0^2 - w^2)^2 + (2 g w)^2).
double transfer_magnitude(double omega0, double gamma, double omega);

nlohmann::json to_json(const ClassifyMetrics& m);
nlohmann::json to_json(const RegressMetrics& m);
nlohmann::json to_json(const ClassifyConfig& c);
nlohmann::json to_json(const RegressConfig& c);
/// Reads known keys over the defaults; unknown keys throw ParameterError.
ClassifyConfig classify_config_from_json(const nlohmann::json& j);
RegressConfig regress_config_from_json(const nlohmann::json& j);

}  // namespace osc
