#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "oscattn/propagator.hpp"
#include "oscattn/quadrature.hpp"

using namespace osc;
using osc::testing::close;

namespace {

double max_abs_diff(const Propagator<>& a, const Propagator<>& b) {
  return std::max({std::abs(a.m11 - b.m11), std::abs(a.m12 - b.m12), std::abs(a.m21 - b.m21),
                   std::abs(a.m22 - b.m22)});
}

Propagator<> oracle_for(const OscParams<>& p, double t) {
  const auto a = oscillator_matrix(p);
  return expm_oracle(a[0], a[1], a[2], a[3], t);
}

}  // namespace

TEST_CASE("exp_At examples") {
  const auto id = exp_At(OscParams<>{0.3, 2.0}, 0.0);
  CHECK(id.m11 == 1.0);
  CHECK(id.m12 == 0.0);
  CHECK(id.m21 == 0.0);
  CHECK(id.m22 == 1.0);

  const auto q = exp_At(OscParams<>{0.0, 1.0}, kPi / 2);
  CHECK(close(q.m11, 0.0, 1e-15));
  CHECK(close(q.m12, 1.0, 1e-15));
  CHECK(close(q.m21, -1.0, 1e-15));
  CHECK(close(q.m22, 0.0, 1e-15));

  const auto c = exp_At(OscParams<>{1.0, 1.0}, 1.0);
  const double e = std::exp(-1.0);
  CHECK(close(c.m11, 2 * e, 1e-15));
  CHECK(close(c.m12, e, 1e-15));
  CHECK(close(c.m21, -e, 1e-15));
  CHECK(close(c.m22, 0.0, 1e-15));

  CHECK(max_abs_diff(exp_At(OscParams<>{0.5, 1.5}, 0.7), oracle_for({0.5, 1.5}, 0.7)) < 1e-10);
  CHECK_THROWS_AS(exp_At(OscParams<>{0.5, 1.5}, -0.1), RangeError);
}

TEST_CASE("expm_oracle examples") {
  const auto z = expm_oracle(0, 0, 0, 0, 3.7);
  CHECK(z.m11 == 1.0);
  CHECK(z.m22 == 1.0);
  CHECK(z.m12 == 0.0);
  const auto d = expm_oracle(-1, 0, 0, -2, 1.0);
  CHECK(close(d.m11, std::exp(-1.0), 0, 1e-14));
  CHECK(close(d.m22, std::exp(-2.0), 0, 1e-14));
  CHECK(d.m12 == 0.0);
  CHECK(max_abs_diff(oracle_for({2.0, 1.0}, 0.5), exp_At(OscParams<>{2.0, 1.0}, 0.5)) < 1e-10);
  CHECK_THROWS_AS(expm_oracle(1000, 0, 0, 0, 1.0), MagnitudeError);
}

TEST_CASE("propagate examples") {
  const auto z = propagate(State2<>{1.0, 0.0}, OscParams<>{0.0, 1.0}, 2 * kPi);
  CHECK(close(z.x, 1.0, 1e-14));
  CHECK(close(z.p, 0.0, 1e-14));
  const auto zero = propagate(State2<>{0.0, 0.0}, OscParams<>{0.7, 0.3}, 5.0);
  CHECK(zero.x == 0.0);
  CHECK(zero.p == 0.0);

  const OscParams<> p{0.2, 1.3};
  OdeSystem sys{2, [&](double, std::span<const double> s, std::span<double> ds) {
                  ds[0] = s[1];
                  ds[1] = -p.omega0 * p.omega0 * s[0] - 2 * p.gamma * s[1];
                }};
  const std::vector<double> z0{1.0, 1.0};
  const auto ref = rk4_integrate(sys, z0, 0.0, 0.9, 4096);
  const auto cf = propagate(State2<>{1.0, 1.0}, p, 0.9);
  CHECK(close(cf.x, ref[0], 1e-8));
  CHECK(close(cf.p, ref[1], 1e-8));
}

TEST_CASE("closed form matches the matrix-exponential oracle in every regime") {
  Rng rng(3);
  for (int regime = 0; regime < 3; ++regime) {
    for (int n = 0; n < 100; ++n) {
      const auto p = testing::random_params(rng, regime);
      const double t = rng.uniform(0.0, 5.0);
      const auto a = exp_At(p, t);
      const auto b = oracle_for(p, t);
      CHECK(max_abs_diff(a, b) < 1e-10);
    }
  }
}

TEST_CASE("semigroup law") {
  Rng rng(4);
  for (int regime = 0; regime < 3; ++regime) {
    for (int n = 0; n < 100; ++n) {
      const auto p = testing::random_params(rng, regime);
      const double s = rng.uniform(0.0, 3.0);
      const double t = rng.uniform(0.0, 3.0);
      const auto lhs = exp_At(p, s + t);
      const auto rhs = exp_At(p, s) * exp_At(p, t);
      CHECK(max_abs_diff(lhs, rhs) < 1e-10);
    }
  }
}

TEST_CASE("determinant law") {
  Rng rng(14);
  for (int regime = 0; regime < 3; ++regime) {
    for (int n = 0; n < 100; ++n) {
      const auto p = testing::random_params(rng, regime);
      // e^{-2 gamma t} is e^{2 sigma t} times smaller than the entry products;
      // beyond sigma t ~ 4 no double matrix can resolve it to 1e-10.
      double t_max = 3.0;
      if (regime == 2) t_max = std::min(t_max, 4.0 / std::sqrt(p.gamma * p.gamma - p.omega0 * p.omega0));
      const double t = rng.uniform(0.0, t_max);
      CHECK(close(exp_At(p, t).det(), std::exp(-2 * p.gamma * t), 0.0, 1e-10));
    }
  }
}

TEST_CASE("determinant law for stiff overdamped flows, measured against the entry scale") {
  Rng rng(15);
  for (int n = 0; n < 100; ++n) {
    const auto p = testing::random_params(rng, 2);
    const double t = rng.uniform(0.0, 3.0);
    const auto m = exp_At(p, t);
    const double scale = std::abs(m.m11 * m.m22) + std::abs(m.m12 * m.m21);
    CHECK(std::abs(m.det() - std::exp(-2 * p.gamma * t)) <= 1e-13 * scale);
  }
}

TEST_CASE("closed-form trajectories satisfy the ODE") {
  Rng rng(5);
  const double h = 1e-4;
  for (int regime = 0; regime < 3; ++regime) {
    for (int n = 0; n < 10; ++n) {
      const auto p = testing::random_params(rng, regime);
      const State2<> z0{rng.uniform(-1, 1), rng.uniform(-1, 1)};
      auto x = [&](double t) { return propagate(z0, p, t).x; };
      for (int k = 1; k <= 20; ++k) {
        const double t = 0.2 * k;
        const double xd = finite_diff(x, t, h, 1);
        const double xdd = finite_diff(x, t, h, 2);
        const double res = xdd + 2 * p.gamma * xd + p.omega0 * p.omega0 * x(t);
        CHECK(std::abs(res) <= 1e-5 * (1 + std::abs(x(t))));
      }
    }
  }
}

TEST_CASE("regime boundary continuity") {
  for (double w : {0.3, 1.0, 4.0}) {
    for (double sgn : {-1.0, 1.0}) {
      const OscParams<> near{w * (1 + sgn * 1e-7), w};
      const OscParams<> crit{w, w};
      for (int k = 0; k <= 50; ++k) {
        const double t = 0.1 * k;
        CHECK(max_abs_diff(exp_At(near, t), exp_At(crit, t)) <= 1e-6);
      }
    }
  }
}

TEST_CASE("series and paired-exponential branches stay accurate") {
  // Tiny omega_d t.
  const OscParams<> u{1.0 - 1e-10, 1.0};
  const auto a = exp_At(u, 1e-3);
  CHECK(max_abs_diff(a, oracle_for(u, 1e-3)) < 1e-14);
  // sigma t far beyond the cosh overflow range of the plain formula's terms.
  const OscParams<> o{50.0, 1.0};
  const auto b = exp_At(o, 30.0);
  CHECK(std::isfinite(b.m11));
  const double slow = 1.0 / (50.0 + std::sqrt(2499.0));
  CHECK(close(b.m12, std::exp(-slow * 30.0) / (2 * std::sqrt(2499.0)), 0.0, 1e-10));
}
