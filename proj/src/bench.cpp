#include "oscattn/bench.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "oscattn/config_json.hpp"

namespace osc {

void BenchSweep::validate() const {
  auto positive = [](const std::vector<std::size_t>& v, const char* name) {
    if (v.empty()) throw ParameterError(std::string("bench sweep: empty list ") + name);
    for (std::size_t x : v) {
      if (x < 1) throw ParameterError(std::string("bench sweep: values of ") + name + " must be >= 1");
    }
  };
  positive(N, "N");
  positive(d, "d");
  positive(S, "S");
  positive(J, "J");
  for (std::size_t s : S) {
    if (s < 2) throw ParameterError("bench sweep: the solver needs S >= 2");
  }
  if (repeats < 3) throw ParameterError("bench sweep: repeats must be >= 3");
  if (heads < 1) throw ParameterError("bench sweep: heads must be >= 1");
  for (std::size_t w : d) {
    if (w % heads) throw ParameterError("bench sweep: every d must be divisible by heads");
  }
  if (!(min_sample_ms >= 0.0)) throw ParameterError("bench sweep: min_sample_ms must be >= 0");
}

namespace {

struct Instance {
  Matrix x;
  TimeGrid grid;
  LayerParams params;
  BaselineField field;
};

Instance make_instance(const BenchSweep& sw, std::size_t N, std::size_t d, std::size_t J) {
  Rng rng(sw.seed);
  Instance in;
  in.params = init_layer_params(d, sw.heads, N, rng, J);
  in.x = Matrix(N, d);
  for (double& v : in.x.a) v = rng.normal();
  std::vector<double> raw{0.0};
  for (std::size_t i = 1; i < N; ++i) raw.push_back(raw.back() + rng.exponential(1.0));
  in.grid = normalize_times(raw);
  if (sw.field == BaselineField::Kind::dense_tanh) in.field = random_dense_baseline(in.params, rng);
  return in;
}

std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchSweep& sw) {
  sw.validate();
  std::vector<BenchRow> rows;
  for (std::size_t N : sw.N) {
    for (std::size_t d : sw.d) {
      for (std::size_t J : sw.J) {
        const Instance in = make_instance(sw, N, d, J);
        for (std::size_t S : sw.S) {
          BenchRow r;
          r.N = N;
          r.d = d;
          r.S = S;
          r.J = J;
          LayerTrace tr;
          layer_forward(in.x, in.grid, in.params, &tr);
          r.closed_scratch_bytes = tr.peak_scratch_bytes;
          NumericTrace nt;
          numerical_attention_layer(in.x, in.grid, in.params, static_cast<int>(S), in.field, &nt);
          r.numeric_path_bytes = nt.probe.peak_path_bytes;

          r.t_closed_ms = time_median_ms([&] { return layer_forward(in.x, in.grid, in.params); }, sw.repeats,
                                         sw.warmup, sw.min_sample_ms, &r.inner_closed);
          r.t_numeric_ms = time_median_ms(
              [&] { return numerical_attention_layer(in.x, in.grid, in.params, static_cast<int>(S), in.field); },
              sw.repeats, sw.warmup, sw.min_sample_ms, &r.inner_numeric);
          r.speedup = r.t_numeric_ms / r.t_closed_ms;
          r.predicted_ratio = static_cast<double>(J) / (static_cast<double>(S) * static_cast<double>(d));
          rows.push_back(r);
        }
      }
    }
  }
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "N,d,S,J,t_closed_ms,t_numeric_ms,speedup,predicted_ratio\n";
  for (const auto& r : rows) {
    os << r.N << ',' << r.d << ',' << r.S << ',' << r.J << ',' << fmt6(r.t_closed_ms) << ','
       << fmt6(r.t_numeric_ms) << ',' << fmt6(r.speedup) << ',' << fmt6(r.predicted_ratio) << '\n';
  }
  return os.str();
}

nlohmann::json bench_json(const std::vector<BenchRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"N", r.N},
                   {"d", r.d},
                   {"S", r.S},
                   {"J", r.J},
                   {"t_closed_ms", r.t_closed_ms},
                   {"t_numeric_ms", r.t_numeric_ms},
                   {"speedup", r.speedup},
                   {"predicted_ratio", r.predicted_ratio},
                   {"closed_scratch_bytes", r.closed_scratch_bytes},
                   {"numeric_path_bytes", r.numeric_path_bytes},
                   {"inner_closed", r.inner_closed},
                   {"inner_numeric", r.inner_numeric}});
  }
  double best = 0.0;
  for (const auto& r : rows) best = std::max(best, r.speedup);
  return {{"rows", out}, {"count", rows.size()}, {"max_speedup", best}};
}

std::string bench_svg(const std::vector<BenchRow>& rows) {
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::vector<std::pair<double, double>>> lines;
  double s_lo = INFINITY, s_hi = -INFINITY, y_hi = 0.0;
  for (const auto& r : rows) {
    lines[{r.N, r.d, r.J}].push_back({static_cast<double>(r.S), r.speedup});
    s_lo = std::min(s_lo, static_cast<double>(r.S));
    s_hi = std::max(s_hi, static_cast<double>(r.S));
    y_hi = std::max(y_hi, r.speedup);
  }
  if (!(s_hi > s_lo)) s_hi = s_lo + 1.0;
  if (!(y_hi > 0.0)) y_hi = 1.0;
  const double W = 640, H = 400, m = 50;
  auto px = [&](double s) { return m + (W - 2 * m) * (s - s_lo) / (s_hi - s_lo); };
  auto py = [&](double y) { return H - m - (H - 2 * m) * y / (1.05 * y_hi); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << H - m << "\" x2=\"" << W - m << "\" y2=\"" << H - m
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << H - m << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">solver steps S</text>\n";
  os << "<text x=\"14\" y=\"" << H / 2 << "\" transform=\"rotate(-90 14 " << H / 2
     << ")\" text-anchor=\"middle\">speedup</text>\n";
  os << "<text x=\"" << m - 6 << "\" y=\"" << py(y_hi) << "\" text-anchor=\"end\">" << fmt6(y_hi) << "</text>\n";
  std::size_t k = 0;
  for (auto& [key, pts] : lines) {
    std::sort(pts.begin(), pts.end());
    const char* c = colors[k % 6];
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (const auto& [s, y] : pts) os << px(s) << ',' << py(y) << ' ';
    os << "\"/>\n";
    os << "<text x=\"" << W - m + 4 << "\" y=\"" << m + 16 * k << "\" fill=\"" << c << "\" font-size=\"11\">N="
       << std::get<0>(key) << " d=" << std::get<1>(key) << " J=" << std::get<2>(key) << "</text>\n";
    ++k;
  }
  os << "</svg>\n";
  return os.str();
}

void emit_report(const std::vector<BenchRow>& rows, const std::filesystem::path& dir, bool svg) {
  if (rows.empty()) throw ParameterError("emit_report: no rows");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  auto write = [&](const char* name, const std::string& text) {
    const auto path = dir / name;
    std::ofstream f(path);
    f << text;
    f.close();
    if (!f) throw IoError("cannot write " + path.string());
  };
  write("bench.csv", bench_csv(rows));
  write("bench.json", bench_json(rows).dump(2) + "\n");
  if (svg) write("bench.svg", bench_svg(rows));
}

nlohmann::json to_json(const BenchSweep& s) {
  return {{"N", s.N},
          {"d", s.d},
          {"S", s.S},
          {"J", s.J},
          {"repeats", s.repeats},
          {"warmup", s.warmup},
          {"heads", s.heads},
          {"field", s.field == BaselineField::Kind::dense_tanh ? "dense_tanh" : "linear"},
          {"min_sample_ms", s.min_sample_ms}};
}

BenchSweep bench_sweep_from_json(const nlohmann::json& j) {
  const auto b = overlay_config(to_json(BenchSweep{}), j, "bench sweep");
  for (const char* key : {"N", "d", "S", "J"}) {
    for (const auto& v : b[key]) {
      if (!v.is_number_unsigned()) throw ParameterError(std::string("bench sweep: ") + key + " must list positive integers");
    }
  }
  BenchSweep s;
  s.N = b["N"].get<std::vector<std::size_t>>();
  s.d = b["d"].get<std::vector<std::size_t>>();
  s.S = b["S"].get<std::vector<std::size_t>>();
  s.J = b["J"].get<std::vector<std::size_t>>();
  s.repeats = b["repeats"];
  s.warmup = b["warmup"];
  s.heads = b["heads"];
  const std::string field = b["field"];
  if (field == "dense_tanh") {
    s.field = BaselineField::Kind::dense_tanh;
  } else if (field == "linear") {
    s.field = BaselineField::Kind::linear;
  } else {
    throw ParameterError("bench sweep: field must be dense_tanh or linear");
  }
  s.min_sample_ms = b["min_sample_ms"];
  s.validate();
  return s;
}

}  // namespace osc
