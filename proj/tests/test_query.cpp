#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "oscattn/quadrature.hpp"
#include "oscattn/query.hpp"

using namespace osc;
using osc::testing::close;

namespace {

FrequencyGrid small_grid() { return log_grid(4, 1.0, 6.0, true); }

QueryExpansion<> random_expansion(Rng& rng, const FrequencyGrid& g, std::size_t d) {
  QueryExpansion<> q;
  q.grid = g;
  q.dc.resize(d);
  for (auto& v : q.dc) v = rng.uniform(-1, 1);
  for (std::size_t j = 0; j < g.size(); ++j) {
    std::vector<double> a(d), b(d);
    for (std::size_t c = 0; c < d; ++c) {
      a[c] = rng.uniform(-1, 1);
      b[c] = rng.uniform(-1, 1);
    }
    q.A.push_back(a);
    q.B.push_back(b);
  }
  return q;
}

std::vector<double> uniform_times(Rng& rng, std::size_t n, double lo, double hi) {
  std::vector<double> t(n);
  for (auto& x : t) x = rng.uniform(lo, hi);
  std::sort(t.begin(), t.end());
  return t;
}

double coef_norm(const QueryExpansion<>& q) {
  double s = 0;
  for (double v : q.dc) s += v * v;
  for (const auto& r : q.A)
    for (double v : r) s += v * v;
  for (const auto& r : q.B)
    for (double v : r) s += v * v;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("grids") {
  const auto g = default_grid(64);
  CHECK(g.size() == 8);
  CHECK(close(g.freqs.front(), 2 * kPi, 1e-14));
  CHECK(close(g.freqs.back(), 64 * kPi, 1e-12));
  for (std::size_t j = 1; j < g.size(); ++j) CHECK(g.freqs[j] > g.freqs[j - 1]);
  CHECK(default_grid(1).freqs.back() > default_grid(1).freqs.front());
  CHECK_THROWS_AS(validate(FrequencyGrid{{2.0, 1.0}, true}), OrderingError);
  CHECK_THROWS_AS(validate(FrequencyGrid{{-1.0}, true}), ParameterError);
}

TEST_CASE("fit_query examples") {
  const auto g = small_grid();
  Rng rng(1);
  const auto t = uniform_times(rng, 3 * g.size(), 0.0, 2.0);
  std::vector<std::vector<double>> s;
  for (double x : t) s.push_back({std::cos(g.freqs[1] * x)});
  const auto q = fit_query(t, s, g, 0.0);
  CHECK(close(q.dc[0], 0.0, 1e-9));
  for (std::size_t j = 0; j < g.size(); ++j) {
    CHECK(close(q.A[j][0], j == 1 ? 1.0 : 0.0, 1e-9));
    CHECK(close(q.B[j][0], 0.0, 1e-9));
  }

  std::vector<std::vector<double>> zeros(t.size(), std::vector<double>(3, 0.0));
  const auto z = fit_query(t, zeros, g, 1e-6);
  CHECK(coef_norm(z) == 0.0);

  CHECK_THROWS_AS(fit_query(std::vector<double>{0.1, 0.2}, {{1.0}, {2.0}}, g, 0.0), RankDeficiencyError);
  CHECK_THROWS_AS(fit_query(std::vector<double>{0.1}, {{1.0}, {2.0}}, g, 0.0), ShapeError);
  CHECK_THROWS_AS(fit_query(std::vector<double>{0.1}, {{1.0}}, g, -1.0), RangeError);
}

TEST_CASE("noisy fit residual stays at the noise level") {
  const auto g = small_grid();
  const double sigma = 0.05;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto t = uniform_times(rng, 60, 0.0, 3.0);
    std::vector<std::vector<double>> s;
    for (double x : t) s.push_back({0.8 * std::sin(g.freqs[2] * x) + rng.normal(0.0, sigma)});
    const auto q = fit_query(t, s, g, 1e-6);
    double ss = 0.0;
    for (std::size_t l = 0; l < t.size(); ++l) {
      const double r = eval_query(q, t[l])[0] - s[l][0];
      ss += r * r;
    }
    CHECK(std::sqrt(ss / t.size()) <= 2 * sigma);
  }
}

TEST_CASE("fit idempotence") {
  const auto g = small_grid();
  Rng rng(3);
  for (int n = 0; n < 20; ++n) {
    const auto q = random_expansion(rng, g, 2);
    const auto t = uniform_times(rng, 2 * g.size() + 1 + rng.below(10), 0.0, 3.0);
    std::vector<std::vector<double>> s;
    for (double x : t) s.push_back(eval_query(q, x));
    const auto f = fit_query(t, s, g, 0.0);
    for (std::size_t j = 0; j < g.size(); ++j) {
      for (std::size_t c = 0; c < 2; ++c) {
        CHECK(close(f.A[j][c], q.A[j][c], 1e-8));
        CHECK(close(f.B[j][c], q.B[j][c], 1e-8));
      }
    }
    for (std::size_t c = 0; c < 2; ++c) CHECK(close(f.dc[c], q.dc[c], 1e-8));
  }
}

TEST_CASE("ridge monotonicity") {
  const auto g = small_grid();
  Rng rng(4);
  for (int n = 0; n < 20; ++n) {
    const auto t = uniform_times(rng, 5 + rng.below(20), 0.0, 2.0);
    std::vector<std::vector<double>> s;
    for (std::size_t l = 0; l < t.size(); ++l) s.push_back({rng.normal(), rng.normal()});
    double prev = INFINITY;
    for (double ridge : {1e-6, 1e-4, 1e-2, 1.0, 100.0}) {
      const double norm = coef_norm(fit_query(t, s, g, ridge));
      CHECK(norm <= prev * (1 + 1e-12));
      prev = norm;
    }
  }
}

TEST_CASE("ill-conditioned fits fall back to a larger ridge") {
  const auto g = default_grid(64);
  const std::vector<double> t{0.0, 0.01, 0.02};
  const auto hat = make_query_hat(t, g, 1e-30);
  CHECK(hat.ridge_used > 1e-30);
}

TEST_CASE("rotate_query examples") {
  const auto g = small_grid();
  Rng rng(5);
  const auto q = random_expansion(rng, g, 3);
  const auto r0 = rotate_query(q, 0.0);
  CHECK(r0.A_tilde == q.A);
  CHECK(r0.B_tilde == q.B);

  const double ti = kPi / (2 * g.freqs[2]);
  const auto rq = rotate_query(q, ti);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(close(rq.A_tilde[2][c], q.B[2][c], 1e-15));
    CHECK(close(rq.B_tilde[2][c], -q.A[2][c], 1e-15));
  }

  const auto r = rotate_query(q, 0.83);
  for (int k = 0; k < 50; ++k) {
    const double s = 0.05 * k;
    const auto a = eval_rotated(r, s);
    const auto b = eval_query(q, 0.83 + s);
    for (std::size_t c = 0; c < 3; ++c) CHECK(close(a[c], b[c], 1e-12));
  }
  for (std::size_t j = 0; j < g.size(); ++j) {
    for (std::size_t c = 0; c < 3; ++c) {
      CHECK(close(r.A_tilde[j][c] * r.A_tilde[j][c] + r.B_tilde[j][c] * r.B_tilde[j][c],
                  q.A[j][c] * q.A[j][c] + q.B[j][c] * q.B[j][c], 1e-12));
    }
  }
}

TEST_CASE("mean_query examples") {
  QueryExpansion<> c;
  c.grid = FrequencyGrid{{}, true};
  c.dc = {1.5, -2.0};
  const auto m = mean_query(c, 0.2, 0.9);
  CHECK(m[0] == 1.5);
  CHECK(m[1] == -2.0);

  QueryExpansion<> cosq;
  cosq.grid = FrequencyGrid{{1.0}, false};
  cosq.A = {{1.0}};
  cosq.B = {{0.0}};
  CHECK(close(mean_query(cosq, 0.0, 2 * kPi)[0], 0.0, 1e-12));

  Rng rng(6);
  const auto q = random_expansion(rng, small_grid(), 2);
  const auto mq = mean_query(q, 0.2, 1.1);
  for (std::size_t c2 = 0; c2 < 2; ++c2) {
    const double ref = quad_gauss([&](double t) { return eval_query(q, t)[c2]; }, 0.2, 1.1, 256) / 0.9;
    CHECK(close(mq[c2], ref, 1e-10));
  }
  CHECK_THROWS_AS(mean_query(q, 1.0, 1.0), WindowError);
}
