#include <doctest.h>

#include "helpers.hpp"
#include "oscattn/oracles.hpp"

using namespace osc;
using namespace osc::testing;

namespace {

struct Instance {
  Matrix x;
  TimeGrid grid;
  LayerParams p;
};

Instance make_instance(std::uint64_t seed, std::size_t N, std::size_t d, std::size_t H) {
  Rng rng(seed);
  Instance in{Matrix(N, d), {}, init_layer_params(d, H, N, rng)};
  for (double& v : in.x.a) v = rng.normal();
  std::vector<double> raw{0.0};
  for (std::size_t i = 1; i < N; ++i) raw.push_back(raw.back() + rng.exponential(1.0));
  in.grid = normalize_times(raw);
  return in;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.a.size(); ++i) m = std::max(m, std::abs(a.a[i] - b.a[i]));
  return m;
}

}  // namespace

TEST_CASE("oscillator system integrates to the closed-form trajectory") {
  Rng rng(1);
  for (int regime = 0; regime < 3; ++regime) {
    KeyTrajectory<> k;
    k.anchor = 0.3;
    for (int c = 0; c < 3; ++c) {
      k.params.push_back(random_params(rng, regime));
      k.z0.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }
    k.forcing.freqs = {1.3, 4.1};
    k.forcing.P = {{0.5, -0.2, 1.0}, {0.1, 0.3, -0.7}};
    k.forcing.Q = {{-0.4, 0.6, 0.2}, {0.9, -0.5, 0.0}};
    std::vector<double> z0;
    for (const auto& z : k.z0) z0.insert(z0.end(), {z.x, z.p});
    const auto z = rk4_integrate(oscillator_system(k), z0, 0.3, 1.5, 4096);
    const auto ref = eval_trajectory(k, 1.5);
    for (int c = 0; c < 3; ++c) {
      CHECK(close(z[2 * c], ref.x[c], 1e-9));
      CHECK(close(z[2 * c + 1], ref.v[c], 1e-9));
    }
  }
}

TEST_CASE("baseline: single token matches the closed-form layer") {
  auto in = make_instance(2, 1, 8, 2);
  in.grid = TimeGrid{{0.0}};
  const auto a = layer_forward(in.x, in.grid, in.p);
  const auto b = numerical_attention_layer(in.x, in.grid, in.p, 20);
  CHECK(max_abs_diff(a, b) <= 1e-14);
}

TEST_CASE("baseline: converges to the closed-form layer") {
  const auto in = make_instance(3, 6, 16, 2);
  LayerTrace tr;
  const auto cf = layer_forward(in.x, in.grid, in.p, &tr);
  NumericTrace nt;
  const auto num = numerical_attention_layer(in.x, in.grid, in.p, 4096, {}, &nt);
  CHECK(max_abs_diff(cf, num) <= 1e-6);
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t j = 0; j < 6; ++j) {
      for (std::size_t i = 0; i <= j; ++i) {
        CHECK(close(tr.heads[h].logits(j, i), nt.heads[h].logits(j, i), 1e-8));
      }
    }
  }

  double prev = std::numeric_limits<double>::infinity();
  for (int S : {20, 40, 80}) {
    const double err = max_abs_diff(cf, numerical_attention_layer(in.x, in.grid, in.p, S));
    CHECK(err < prev);
    prev = err;
  }
}

TEST_CASE("baseline: path storage grows with S, closed-form scratch does not") {
  const auto in = make_instance(4, 5, 8, 2);
  std::vector<std::size_t> path, scratch;
  for (int S : {20, 40, 80, 160}) {
    NumericTrace nt;
    numerical_attention_layer(in.x, in.grid, in.p, S, {}, &nt);
    path.push_back(nt.probe.peak_path_bytes);
    LayerTrace tr;
    layer_forward(in.x, in.grid, in.p, &tr);
    scratch.push_back(tr.peak_scratch_bytes);
    CHECK(nt.probe.peak_path_bytes == static_cast<std::size_t>(S + 1) * 8 * sizeof(double));
    // Two trajectories per strictly causal pair.
    CHECK(nt.probe.path_allocations == 2 * 2 * 10);
  }
  CHECK(scratch[0] == scratch[3]);
  CHECK(path[3] > 7 * path[0]);
}

TEST_CASE("baseline: dense tanh field") {
  const auto in = make_instance(5, 7, 8, 2);
  Rng rng(6);
  const auto field = random_dense_baseline(in.p, rng);
  NumericTrace nt;
  const auto y = numerical_attention_layer(in.x, in.grid, in.p, 40, field, &nt);
  for (double v : y.a) CHECK(std::isfinite(v));
  for (const auto& h : nt.heads) {
    for (std::size_t j = 0; j < 7; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < 7; ++i) s += h.weights(j, i);
      CHECK(close(s, 1.0, 1e-12));
    }
  }
  CHECK(nt.probe.peak_path_bytes == 41 * 4 * sizeof(double));

  // The dense path integrates a genuine ODE: RK4 at 40 and 400 steps agree closely.
  const auto y2 = numerical_attention_layer(in.x, in.grid, in.p, 400, field);
  CHECK(max_abs_diff(y, y2) <= 1e-5);
}

TEST_CASE("baseline: argument errors") {
  const auto in = make_instance(7, 3, 8, 2);
  CHECK_THROWS_AS(numerical_attention_layer(in.x, in.grid, in.p, 1), RangeError);
  CHECK_THROWS_AS(numerical_attention_layer(in.x, TimeGrid{{0, 1}}, in.p, 8), ShapeError);
  BaselineField f;
  f.kind = BaselineField::Kind::dense_tanh;
  CHECK_THROWS_AS(numerical_attention_layer(in.x, in.grid, in.p, 8, f), ShapeError);
}
