// oscattn: property verification, benchmarks, toy training and HAT
// certificates from one JSON-configured entry point.
//
// Exit codes: 0 success, 1 a check failed, 2 usage or configuration error,
// 3 I/O or other runtime error.

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "oscattn/bench.hpp"
#include "oscattn/config_json.hpp"
#include "oscattn/hat.hpp"
#include "oscattn/toytrain.hpp"
#include "oscattn/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace osc;

namespace {

constexpr int kExitOk = 0, kExitFail = 1, kExitUsage = 2, kExitRuntime = 3;

struct HatRun {
  double a = 0.0, b = 1.0;
  std::size_t n_keys = 6, dim = 2;
  HatOptions opts;
};

json to_json(const HatRun& h) {
  return {{"a", h.a},
          {"b", h.b},
          {"n_keys", h.n_keys},
          {"dim", h.dim},
          {"epsilon", h.opts.epsilon},
          {"gamma", h.opts.gamma},
          {"n_start", h.opts.n_start},
          {"n_max", h.opts.n_max},
          {"fit_intervals", h.opts.fit_intervals},
          {"check_points", h.opts.check_points},
          {"quad_intervals", h.opts.quad_intervals}};
}

HatRun hat_run_from_json(const json& j) {
  const auto b = overlay_config(to_json(HatRun{}), j, "hat config");
  HatRun h;
  h.a = b["a"];
  h.b = b["b"];
  h.n_keys = b["n_keys"];
  h.dim = b["dim"];
  h.opts.epsilon = b["epsilon"];
  h.opts.gamma = b["gamma"];
  h.opts.n_start = b["n_start"];
  h.opts.n_max = b["n_max"];
  h.opts.fit_intervals = b["fit_intervals"];
  h.opts.check_points = b["check_points"];
  h.opts.quad_intervals = b["quad_intervals"];
  if (!(h.b > h.a) || h.n_keys < 1 || h.dim < 1) throw ParameterError("hat config: need b > a, n_keys >= 1, dim >= 1");
  if (!(h.opts.epsilon > 0.0) || !(h.opts.gamma >= 0.0)) throw ParameterError("hat config: need epsilon > 0, gamma >= 0");
  if (h.opts.n_start < 1 || h.opts.n_max < h.opts.n_start) throw ParameterError("hat config: need 1 <= n_start <= n_max");
  return h;
}

/// Everything a run reads, after the config file and flags are merged.
struct RunConfig {
  std::uint64_t seed = 1;
  fs::path out = "oscattn_out";
  bool svg = false;
  std::map<std::string, double> tolerances;
  BenchSweep bench;
  ClassifyConfig classify;
  RegressConfig regress;
  HatRun hat;
};

RunConfig read_config(const std::string& path) {
  RunConfig rc;
  if (path.empty()) return rc;
  std::ifstream f(path);
  if (!f) throw ParameterError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ParameterError("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw ParameterError("config: expected a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "seed") {
      if (!v.is_number_unsigned()) throw ParameterError("config: seed must be a non-negative integer");
      rc.seed = v;
    } else if (key == "out") {
      if (!v.is_string()) throw ParameterError("config: out must be a string");
      rc.out = v.get<std::string>();
    } else if (key == "svg") {
      if (!v.is_boolean()) throw ParameterError("config: svg must be a boolean");
      rc.svg = v;
    } else if (key == "tolerances") {
      if (!v.is_object()) throw ParameterError("config: tolerances must be an object");
      for (const auto& [name, t] : v.items()) {
        if (!t.is_number()) throw ParameterError("config: tolerance '" + name + "' must be a number");
        rc.tolerances[name] = t;
      }
    } else if (key == "bench") {
      rc.bench = bench_sweep_from_json(v);
    } else if (key == "classify") {
      rc.classify = classify_config_from_json(v);
    } else if (key == "regress") {
      rc.regress = regress_config_from_json(v);
    } else if (key == "hat") {
      rc.hat = hat_run_from_json(v);
    } else {
      throw ParameterError("config: unknown key '" + key + "'");
    }
  }
  return rc;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
  f.close();
  if (!f) throw IoError("cannot write " + path.string());
}

std::string curve_csv(const char* metric, const std::vector<double>& loss, const std::vector<double>& val) {
  std::ostringstream os;
  os.precision(10);
  os << "epoch,loss," << metric << "\n";
  for (std::size_t e = 0; e < loss.size(); ++e) os << e + 1 << ',' << loss[e] << ',' << val[e] << '\n';
  return os.str();
}

std::string matrix_csv(const std::vector<std::vector<double>>& m) {
  std::ostringstream os;
  os.precision(10);
  for (const auto& row : m) {
    for (std::size_t k = 0; k < row.size(); ++k) os << (k ? "," : "") << row[k];
    os << '\n';
  }
  return os.str();
}

/// Prints either the human line or the JSON summary.
void report(bool as_json, const json& summary, const std::string& line) {
  if (as_json) {
    std::cout << summary.dump() << std::endl;
  } else {
    std::cout << line << std::endl;
  }
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int cmd_verify(const RunConfig& rc, bool as_json) {
  VerifyConfig vc;
  vc.seed = rc.seed;
  vc.override_tolerances(rc.tolerances);
  const auto results = run_verify(vc);
  json suites = json::array();
  bool all = true;
  for (const auto& r : results) {
    suites.push_back(to_json(r));
    all = all && r.pass;
  }
  const json summary{{"command", "verify"}, {"seed", rc.seed}, {"pass", all}, {"suites", suites}};
  write_text(rc.out / "verify.json", summary.dump(2) + "\n");
  if (as_json) {
    std::cout << summary.dump() << std::endl;
  } else {
    std::printf("%-18s %-4s %8s %12s %12s\n", "suite", "", "cases", "worst", "tolerance");
    for (const auto& r : results) {
      std::printf("%-18s %-4s %8zu %12.3e %12.3e  %s\n", r.name.c_str(), r.pass ? "PASS" : "FAIL", r.cases, r.worst,
                  r.tolerance, r.detail.c_str());
      if (!r.pass) std::printf("  failing case: %s\n", r.failure.dump().c_str());
    }
    std::printf("%s\n", all ? "all suites passed" : "verification FAILED");
  }
  return all ? kExitOk : kExitFail;
}

int cmd_bench(const RunConfig& rc, bool as_json) {
  auto sweep = rc.bench;
  sweep.seed = rc.seed;
  const auto rows = run_bench(sweep);
  emit_report(rows, rc.out, rc.svg);
  double best = 0.0;
  for (const auto& r : rows) best = std::max(best, r.speedup);
  report(as_json, {{"command", "bench"}, {"rows", rows.size()}, {"max_speedup", best}, {"csv", (rc.out / "bench.csv").string()}},
         "bench: " + std::to_string(rows.size()) + " rows, max speedup " + fmt("%.1f", best) + "x, wrote " +
             (rc.out / "bench.csv").string());
  return kExitOk;
}

int cmd_train_classify(const RunConfig& rc, bool as_json) {
  Rng rng(rc.seed);
  const auto m = train_classifier(rc.classify, rng);
  auto j = osc::to_json(m);
  j["config"] = osc::to_json(rc.classify);
  write_text(rc.out / "classify_metrics.json", j.dump(2) + "\n");
  write_text(rc.out / "classify_curve.csv", curve_csv("val_accuracy", m.train_loss, m.val_curve));
  write_text(rc.out / "classify_confusion.csv", matrix_csv(m.confusion));
  report(as_json,
         {{"command", "train-classify"},
          {"val_accuracy", m.val_accuracy},
          {"untrained_val_accuracy", m.untrained_val_accuracy},
          {"diagonal_ratio", m.diagonal_ratio},
          {"seconds", m.seconds}},
         "train-classify: val accuracy " + fmt("%.4f", m.val_accuracy) + " (untrained " +
             fmt("%.4f", m.untrained_val_accuracy) + "), diagonal ratio " + fmt("%.2f", m.diagonal_ratio) + ", " +
             fmt("%.1f", m.seconds) + " s");
  return kExitOk;
}

int cmd_train_regress(const RunConfig& rc, bool as_json) {
  Rng rng(rc.seed);
  const auto m = train_regressor(rc.regress, rng);
  auto j = osc::to_json(m);
  j["config"] = osc::to_json(rc.regress);
  write_text(rc.out / "regress_metrics.json", j.dump(2) + "\n");
  write_text(rc.out / "regress_curve.csv", curve_csv("val_mse", m.train_loss, m.val_curve));
  report(as_json,
         {{"command", "train-regress"},
          {"baseline_mse", m.baseline_mse},
          {"val_mse", m.val_mse},
          {"correlation", m.correlation},
          {"reduction", m.reduction},
          {"seconds", m.seconds}},
         "train-regress: val MSE " + fmt("%.4f", m.val_mse) + " vs baseline " + fmt("%.4f", m.baseline_mse) +
             ", correlation " + fmt("%.3f", m.correlation) + ", " + fmt("%.1f", m.seconds) + " s");
  return kExitOk;
}

int cmd_hat(const RunConfig& rc, bool as_json) {
  Rng rng(rc.seed);
  const auto& h = rc.hat;
  const auto pr = triangle_problem(h.n_keys, h.dim, h.a, h.b, rng);
  const auto c = hat_certificate(pr.q, pr.keys, h.opts);
  auto j = osc::to_json(c);
  j["problem"] = to_json(h);
  j["seed"] = rc.seed;
  write_text(rc.out / "hat_certificate.json", j.dump(2) + "\n");
  report(as_json, {{"command", "hat"}, {"bounds_ok", c.bounds_ok}, {"N_used", c.N_used}, {"epsilon", c.epsilon}},
         std::string("hat: ") + (c.bounds_ok ? "bounds hold" : "bounds FAIL") + " with N = " +
             std::to_string(c.N_used) + " at epsilon " + fmt("%g", c.epsilon));
  return c.bounds_ok ? kExitOk : kExitFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-form oscillator attention: verification, benchmarks, toy training, HAT certificates"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  bool as_json = false, svg = false;
  std::vector<std::string> tol_flags;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides the config)");
  auto* out_opt = app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_flag("--json", as_json, "print a machine-readable summary");
  auto* svg_opt = app.add_flag("--svg", svg, "also write an SVG chart (bench)");
  app.add_option("--tol", tol_flags, "tolerance override name=value; name 'all' sets every tolerance (verify)");

  auto* verify = app.add_subcommand("verify", "run the property suites");
  auto* bench = app.add_subcommand("bench", "time the closed-form layer against the RK4 baseline");
  auto* classify = app.add_subcommand("train-classify", "train the frequency classification toy");
  auto* regress = app.add_subcommand("train-regress", "train the forecasting regression toy");
  auto* hat = app.add_subcommand("hat", "certify a shared oscillator bank for triangle-wave keys");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  RunConfig rc;
  try {
    rc = read_config(config_path);
    if (*seed_opt) rc.seed = seed;
    if (*out_opt) rc.out = out_dir;
    if (*svg_opt) rc.svg = svg;
    for (const auto& t : tol_flags) {
      const auto eq = t.find('=');
      if (eq == std::string::npos) throw ParameterError("--tol expects name=value, got '" + t + "'");
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(t.substr(eq + 1), &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != t.size() - eq - 1) throw ParameterError("--tol: bad number in '" + t + "'");
      rc.tolerances[t.substr(0, eq)] = v;
    }
    VerifyConfig probe;
    probe.override_tolerances(rc.tolerances);
    rc.bench.validate();
    rc.classify.validate();
    rc.regress.validate();
  } catch (const ParameterError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    std::error_code ec;
    fs::create_directories(rc.out, ec);
    if (ec) throw IoError("cannot create " + rc.out.string() + ": " + ec.message());
    if (*verify) return cmd_verify(rc, as_json);
    if (*bench) return cmd_bench(rc, as_json);
    if (*classify) return cmd_train_classify(rc, as_json);
    if (*regress) return cmd_train_regress(rc, as_json);
    if (*hat) return cmd_hat(rc, as_json);
  } catch (const ParameterError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const RangeError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
