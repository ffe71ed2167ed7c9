#include <doctest.h>

#include <cmath>

#include "oscattn/hat.hpp"
#include "oscattn/quadrature.hpp"

using namespace osc;

namespace {

SampledFunction sample(double a, double b, std::size_t n, const std::function<std::vector<double>(double)>& f) {
  SampledFunction s;
  s.a = a;
  s.b = b;
  for (std::size_t m = 0; m <= n; ++m) s.values.push_back(f(a + (b - a) * static_cast<double>(m) / n));
  return s;
}

TrigPolynomial random_poly(Rng& rng, std::size_t degree, std::size_t d, double base, double L) {
  TrigPolynomial p;
  p.base = base;
  p.L = L;
  for (std::size_t k = 0; k < d; ++k) p.c0.push_back(rng.uniform(-1.0, 1.0));
  for (std::size_t n = 0; n < degree; ++n) {
    p.c.emplace_back();
    p.s.emplace_back();
    for (std::size_t k = 0; k < d; ++k) {
      p.c.back().push_back(rng.normal());
      p.s.back().push_back(rng.normal());
    }
  }
  return p;
}

double sup_gap(const OscillatorBank& bank, const TrigPolynomial& p, double t_end, std::size_t points = 2001) {
  double worst = 0.0;
  for (std::size_t m = 0; m < points; ++m) {
    const double t = bank.anchor + (t_end - bank.anchor) * static_cast<double>(m) / (points - 1);
    const auto x = bank_readout(bank, t);
    const auto y = p.eval(t);
    for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - y[k]));
  }
  return worst;
}

/// Sum over modes of the planar amplitude ||(c_n, s_n)||, the natural scale
/// of a damping perturbation.
double amplitude_sum(const TrigPolynomial& p) {
  double s = 0.0;
  for (std::size_t n = 0; n < p.degree(); ++n) {
    double e = 0.0;
    for (std::size_t k = 0; k < p.dim(); ++k) e += p.c[n][k] * p.c[n][k] + p.s[n][k] * p.s[n][k];
    s += std::sqrt(e);
  }
  return s;
}

}  // namespace

TEST_CASE("fejer kernel: limit, order zero, unit mass, positivity and tails") {
  for (std::size_t N : {0u, 1u, 5u, 40u}) CHECK(fejer_kernel(N, 0.0) == doctest::Approx(N + 1.0));
  for (double th : {-3.0, -0.7, 0.2, 1.9, 3.1}) CHECK(fejer_kernel(0, th) == doctest::Approx(1.0));

  const std::size_t n = 20000;
  std::vector<double> f(n + 1);
  for (std::size_t m = 0; m <= n; ++m) f[m] = fejer_kernel(5, -kPi + 2.0 * kPi * m / n);
  CHECK(simpson_uniform(f, 2.0 * kPi / n) / (2.0 * kPi) == doctest::Approx(1.0).epsilon(1e-10));

  for (std::size_t N : {3u, 16u, 64u}) {
    const double delta = 0.5;
    std::vector<double> g(n + 1);
    for (std::size_t m = 0; m <= n; ++m) {
      const double th = -kPi + 2.0 * kPi * m / n;
      const double k = fejer_kernel(N, th);
      CHECK(k >= 0.0);
      g[m] = std::abs(th) >= delta ? k : 0.0;
    }
    const double tail = simpson_uniform(g, 2.0 * kPi / n) / (2.0 * kPi);
    CHECK(tail <= 1.0 / ((N + 1.0) * square(std::sin(delta / 2.0))));
  }
  // Near-zero angles agree with the closed form just outside the switch.
  CHECK(fejer_kernel(12, 1e-9) == doctest::Approx(fejer_kernel(12, 1e-6)).epsilon(1e-9));
}

TEST_CASE("fejer approximation: constants, single modes and a triangle") {
  const double a = 0.5, b = 2.5, L = b - a;
  const auto cst = sample(a, b, 8192, [](double) { return std::vector<double>{1.5, -2.0}; });
  for (std::size_t N : {0u, 4u, 32u}) {
    const auto p = fejer_approx(cst, N);
    for (double t : {a, 1.3, b}) {
      const auto v = p.eval(t);
      CHECK(v[0] == doctest::Approx(1.5).epsilon(1e-14));
      CHECK(v[1] == doctest::Approx(-2.0).epsilon(1e-14));
    }
  }

  const auto mode1 = sample(a, b, 8192, [&](double t) { return std::vector<double>{std::cos(kPi / L * (t - a))}; });
  const auto p = fejer_approx(mode1, 8);
  CHECK(p.c[0][0] == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(std::abs(p.c0[0]) <= 1e-9);
  for (std::size_t n = 2; n <= 8; ++n) CHECK(std::abs(p.c[n - 1][0]) <= 1e-9);
  for (std::size_t n = 1; n <= 8; ++n) CHECK(p.s[n - 1][0] == 0.0);
  CHECK(fourier_partial_sum(mode1, 8).c[0][0] == doctest::Approx(1.0).epsilon(1e-12));

  const double mid = 0.5 * (a + b);
  const auto tri = sample(a, b, 8192, [&](double t) { return std::vector<double>{std::abs(t - mid)}; });
  double prev = INFINITY;
  for (std::size_t N : {8u, 32u, 128u}) {
    const auto q = fejer_approx(tri, N);
    double worst = 0.0;
    for (std::size_t m = 0; m <= 4000; ++m) {
      const double t = a + L * m / 4000.0;
      worst = std::max(worst, std::abs(q.eval(t)[0] - std::abs(t - mid)));
    }
    CHECK(worst < prev);
    prev = worst;
  }
  CHECK(prev < 0.03);

  SampledFunction short_f;
  short_f.values.assign(100, {1.0});
  CHECK_THROWS_AS(fejer_approx(short_f, 4), ShapeError);
}

TEST_CASE("phase shift: identity, pointwise equality and mode energy") {
  Rng rng(7);
  const auto p = random_poly(rng, 12, 3, 0.2, 1.7);
  const auto same = phase_shift(p, p.base);
  for (std::size_t n = 0; n < p.degree(); ++n) {
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(same.c[n][k] == p.c[n][k]);
      CHECK(same.s[n][k] == p.s[n][k]);
    }
  }
  const auto q = phase_shift(p, 1.13);
  for (int m = 0; m < 100; ++m) {
    const double t = 0.2 + 1.7 * m / 99.0;
    const auto u = p.eval(t), v = q.eval(t);
    for (std::size_t k = 0; k < 3; ++k) CHECK(std::abs(u[k] - v[k]) <= 1e-12);
  }
  for (std::size_t n = 0; n < p.degree(); ++n) {
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(square(q.c[n][k]) + square(q.s[n][k]) ==
            doctest::Approx(square(p.c[n][k]) + square(p.s[n][k])).epsilon(1e-13));
    }
  }
}

TEST_CASE("bank realization reproduces trigonometric polynomials") {
  Rng rng(8);
  const double b = 3.0;

  TrigPolynomial cst;
  cst.base = 1.0;
  cst.L = 2.0;
  cst.c0 = {0.7, -0.2};
  const auto cb = realize_bank(cst, 4);
  CHECK(cb.modes() == 4);
  for (std::size_t n = 1; n <= 4; ++n) {
    for (const auto& z : cb.z0[n]) CHECK((z.x == 0.0 && z.p == 0.0));
  }
  for (const auto& z : cb.z0[0]) CHECK(z.p == 0.0);
  CHECK(sup_gap(cb, cst, b) == 0.0);

  TrigPolynomial one = cst;
  one.c = {{0.0, 0.0}, {1.2, -0.4}};
  one.s = {{0.0, 0.0}, {0.3, 0.9}};
  CHECK(sup_gap(realize_bank(one, 2), one, b) <= 1e-13);

  const auto p8 = random_poly(rng, 8, 3, 1.0, 2.0);
  const auto bank = realize_bank(p8, 8);
  CHECK(sup_gap(bank, p8, b) <= 1e-12);
  CHECK(sup_gap(realize_bank(p8, 20), p8, b) <= 1e-12);
  CHECK_THROWS_AS(realize_bank(p8, 7), CapacityError);

  const auto at0 = bank_readout(bank, bank.anchor);
  for (std::size_t k = 0; k < 3; ++k) {
    double s = 0.0;
    for (const auto& mode : bank.z0) s += mode[k].x;
    CHECK(at0[k] == doctest::Approx(s).epsilon(1e-15));
  }
  CHECK_THROWS_AS(bank_readout(bank, 0.5), CausalityError);

  OscillatorBank empty;
  empty.d = 2;
  const auto z = bank_readout(empty, 5.0);
  CHECK(z == std::vector<double>{0.0, 0.0});
}

TEST_CASE("damping perturbation is linear in gamma and bounded by a calibrated constant") {
  Rng rng(9);
  const double T = 1.0;
  const auto p = random_poly(rng, 16, 2, 0.0, T);
  const auto bank = realize_bank(p, 16);
  CHECK(damping_perturbation(bank, 0.0, T).sup_difference == 0.0);
  const double r = damping_perturbation(bank, 1e-3, T).sup_difference / damping_perturbation(bank, 5e-4, T).sup_difference;
  CHECK(r >= 1.8);
  CHECK(r <= 2.2);

  // Calibration bank: unit modes whose signs line up at the window end,
  // where damping losses add coherently.
  TrigPolynomial cal;
  cal.base = 0.0;
  cal.L = T;
  cal.c0 = {0.0, 0.0};
  for (std::size_t n = 1; n <= 16; ++n) {
    cal.c.push_back({n % 2 ? -1.0 : 1.0, 0.0});
    cal.s.push_back({0.0, 0.0});
  }
  const double gamma = 1e-3;
  const double K = damping_perturbation(realize_bank(cal, 16), gamma, T).sup_difference / (gamma * amplitude_sum(cal));
  CHECK(K > 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    const auto fresh = random_poly(rng, 16, 2, 0.0, T);
    const double diff = damping_perturbation(realize_bank(fresh, 16), gamma, T).sup_difference;
    CHECK(diff <= K * gamma * amplitude_sum(fresh));
  }
}

TEST_CASE("certificate: cosine-polynomial keys are realized exactly at the smallest budget") {
  Rng rng(10);
  HatKeys keys;
  keys.a = 0.0;
  keys.b = 2.0;
  keys.dim = 2;
  keys.hold_before_anchor = false;
  for (int i = 0; i < 4; ++i) {
    keys.anchors.push_back(0.4 * i + 0.1);
    std::vector<std::vector<double>> c(7, std::vector<double>(2));
    for (auto& row : c) {
      for (auto& x : row) x = rng.uniform(-1.0, 1.0);
    }
    keys.keys.push_back([c](double t) {
      std::vector<double> v(2, 0.0);
      for (std::size_t n = 0; n < c.size(); ++n) {
        for (std::size_t k = 0; k < 2; ++k) v[k] += c[n][k] * std::cos(n * kPi / 2.0 * t);
      }
      return v;
    });
  }
  auto q = triangle_problem(1, 2, 0.0, 2.0, rng).q;
  const auto cert = hat_certificate(q, keys);
  CHECK(cert.N_used == 8);
  CHECK(cert.bounds_ok);
  for (double e : cert.per_key_sup_error) CHECK(e <= 1e-11);
  CHECK(cert.max_logit_gap <= 1e-10);
}

TEST_CASE("certificate: triangle-wave keys, undamped and lightly damped") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Rng rng(seed);
    const auto pr = triangle_problem(6, 2, 0.0, 1.0, rng);
    for (double gamma : {0.0, 1e-4}) {
      HatOptions o;
      o.gamma = gamma;
      const auto c = hat_certificate(pr.q, pr.keys, o);
      CAPTURE(to_json(c).dump());
      CHECK(c.bounds_ok);
      CHECK(c.N_used <= 256);
      CHECK(!c.capacity_exhausted);
      CHECK(c.chain_ok);
      const auto j = to_json(c);
      for (const char* key : {"epsilon", "N_used", "per_key_sup_error", "max_logit_gap", "max_l1_gap", "bounds_ok"}) {
        CHECK(j.contains(key));
      }
    }
  }
}

TEST_CASE("certificate: budget exhaustion and invalid inputs") {
  Rng rng(4);
  auto pr = triangle_problem(3, 2, 0.0, 1.0, rng);
  HatOptions o;
  o.epsilon = 1e-4;
  o.n_max = 32;
  const auto c = hat_certificate(pr.q, pr.keys, o);
  CHECK(c.capacity_exhausted);
  CHECK(!c.bounds_ok);
  CHECK(c.N_used == 32);
  CHECK(c.chain_ok);

  o = {};
  o.epsilon = 0.0;
  CHECK_THROWS_AS(hat_certificate(pr.q, pr.keys, o), RangeError);
  auto bad = pr.keys;
  std::swap(bad.anchors[0], bad.anchors[1]);
  CHECK_THROWS_AS(hat_certificate(pr.q, bad, {}), OrderingError);
  bad = pr.keys;
  bad.dim = 3;
  CHECK_THROWS_AS(hat_certificate(pr.q, bad, {}), ShapeError);
}
