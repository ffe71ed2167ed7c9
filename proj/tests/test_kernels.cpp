#include <doctest.h>

#include <array>

#include "helpers.hpp"
#include "oscattn/kernels.hpp"
#include "oscattn/quadrature.hpp"

using namespace osc;
using osc::testing::close;

namespace {

double trig(bool is_cos, double x) { return is_cos ? std::cos(x) : std::sin(x); }

double quad_I(TrigPair kind, const KernelArgs& a) {
  const bool c1 = (kind == TrigPair::cc || kind == TrigPair::cs);
  const bool c2 = (kind == TrigPair::cc || kind == TrigPair::sc);
  return quad_gauss(
      [&](double s) { return std::exp(-a.gamma * s) * trig(c1, a.lambda1 * s) * trig(c2, a.lambda2 * s); }, 0.0,
      a.delta, 256);
}

}  // namespace

TEST_CASE("kernel_C and kernel_S examples") {
  CHECK(kernel_S(2.0, 0.7, 0.0) == 0.0);
  CHECK(close(kernel_C(2.0, 0.0, 0.0), 2.0, 1e-15));
  CHECK(close(kernel_C(1.0, 1.0, 0.0), 1.0 - std::exp(-1.0), 1e-15));
  const double q = quad_gauss([](double s) { return std::exp(-0.4 * s) * std::cos(2.1 * s); }, 0.0, 1.3, 256);
  CHECK(close(kernel_C(1.3, 0.4, 2.1), q, 1e-12));
}

TEST_CASE("kernel_I examples") {
  CHECK(close(kernel_I(TrigPair::cc, {kPi, 0.0, 1.0, 1.0}), kPi / 2, 1e-14));
  CHECK(close(kernel_I(TrigPair::ss, {kPi, 0.0, 1.0, 1.0}), kPi / 2, 1e-14));
  CHECK(close(kernel_I(TrigPair::cs, {0.8, 0.0, 2.0, 3.0}), kernel_I(TrigPair::sc, {0.8, 0.0, 3.0, 2.0}), 1e-15));
  const KernelArgs a{1.1, 0.6, 1.4, 2.2};
  CHECK(close(kernel_I(TrigPair::sc, a), quad_I(TrigPair::sc, a), 1e-12));
  CHECK_THROWS_AS(kernel_I(TrigPair::cc, {0.0, 0.1, 1, 1}), RangeError);
  CHECK_THROWS_AS(kernel_I(TrigPair::cc, {1.0, -0.1, 1, 1}), RangeError);
}

TEST_CASE("kernel_tC and kernel_tS examples") {
  CHECK(kernel_tS(1.0, 0.0, 0.0) == 0.0);
  CHECK(close(kernel_tC(1.0, 0.0, 0.0), 0.5, 1e-15));
  const double q = quad_gauss([](double s) { return s * std::exp(-0.8 * s) * std::cos(2.0 * s); }, 0.0, 1.5, 256);
  CHECK(close(kernel_tC(1.5, 0.8, 2.0), q, 1e-11));
}

TEST_CASE("particular_I1_I2 examples") {
  const auto z = particular_I1_I2(0.0, 0.3, 1.2, 0.9);
  CHECK(z.first == 0.0);
  const auto [i1, i2] = particular_I1_I2(1.0, 0.3, 1.2, 0.9);
  const auto all = kernel_I_all(1.0, 0.3, 1.2, 0.9);
  CHECK(close(i1, all.sc, 1e-12));
  CHECK(close(i2, all.ss, 1e-12));
  const auto [d1, d2] = particular_I1_I2(2.0, 0.1, 2.0, 2.0);
  const double q1 = quad_gauss([](double s) { return std::exp(-0.1 * s) * std::sin(2 * s) * std::cos(2 * s); }, 0, 2);
  const double q2 = quad_gauss([](double s) { return std::exp(-0.1 * s) * std::sin(2 * s) * std::sin(2 * s); }, 0, 2);
  CHECK(close(d1, q1, 1e-12));
  CHECK(close(d2, q2, 1e-12));
  // Undamped equal frequencies hit the explicit limit branch.
  const auto [u1, u2] = particular_I1_I2(kPi, 0.0, 1.0, 1.0);
  CHECK(close(u1, 0.0, 1e-12));
  CHECK(close(u2, kPi / 2, 1e-12));
}

TEST_CASE("oracle equivalence on random arguments") {
  Rng rng(21);
  const std::array<TrigPair, 4> kinds{TrigPair::cc, TrigPair::ss, TrigPair::sc, TrigPair::cs};
  for (auto kind : kinds) {
    for (int n = 0; n < 250; ++n) {
      const KernelArgs a{rng.uniform(0.01, 3.0), rng.uniform(0.0, 3.0), rng.uniform(0.0, 12.0),
                         rng.uniform(0.0, 12.0)};
      const double v = kernel_I(kind, a);
      CHECK(std::abs(v - quad_I(kind, a)) <= 1e-9 * (1 + std::abs(v)));
    }
  }
  for (int n = 0; n < 250; ++n) {
    const double d = rng.uniform(0.01, 3.0), g = rng.uniform(0.0, 3.0), l = rng.uniform(0.0, 12.0);
    const auto [c, s] = kernel_CS(d, g, l);
    const auto [tc, ts] = kernel_tCS(d, g, l);
    CHECK(close(c, quad_gauss([&](double x) { return std::exp(-g * x) * std::cos(l * x); }, 0, d), 1e-9, 1e-9));
    CHECK(close(s, quad_gauss([&](double x) { return std::exp(-g * x) * std::sin(l * x); }, 0, d), 1e-9, 1e-9));
    CHECK(close(tc, quad_gauss([&](double x) { return x * std::exp(-g * x) * std::cos(l * x); }, 0, d), 1e-9, 1e-9));
    CHECK(close(ts, quad_gauss([&](double x) { return x * std::exp(-g * x) * std::sin(l * x); }, 0, d), 1e-9, 1e-9));
  }
}

TEST_CASE("series branch matches the closed form at the switch") {
  // Either side of |w| = 1 the two evaluations must agree.
  for (double r : {0.999999, 1.000001}) {
    for (double ang : {0.0, 0.4, 1.2, 1.5707963}) {
      const double g = r * std::cos(ang), l = r * std::sin(ang);
      const auto [c, s] = kernel_CS(1.0, g, l);
      const auto [tc, ts] = kernel_tCS(1.0, g, l);
      CHECK(close(c, quad_gauss([&](double x) { return std::exp(-g * x) * std::cos(l * x); }, 0, 1), 1e-14));
      CHECK(close(s, quad_gauss([&](double x) { return std::exp(-g * x) * std::sin(l * x); }, 0, 1), 1e-14));
      CHECK(close(tc, quad_gauss([&](double x) { return x * std::exp(-g * x) * std::cos(l * x); }, 0, 1), 1e-14));
      CHECK(close(ts, quad_gauss([&](double x) { return x * std::exp(-g * x) * std::sin(l * x); }, 0, 1), 1e-14));
    }
  }
}

TEST_CASE("degeneracy continuity") {
  const std::array<TrigPair, 4> kinds{TrigPair::cc, TrigPair::ss, TrigPair::sc, TrigPair::cs};
  for (auto kind : kinds) {
    for (double a : {0.0, 0.5, 3.0, 11.0}) {
      for (double d : {0.1, 1.0, 3.0}) {
        const double base = kernel_I(kind, {d, 0.0, a, a});
        for (double eps : {1e-7, -1e-7}) {
          if (a + eps < 0) continue;
          CHECK(std::abs(kernel_I(kind, {d, 0.0, a, a + eps}) - base) <= 1e-6);
        }
      }
    }
  }
}

TEST_CASE("tC is minus the gamma derivative of C") {
  Rng rng(8);
  for (int n = 0; n < 100; ++n) {
    const double d = rng.uniform(0.05, 3.0), g = rng.uniform(0.01, 3.0), l = rng.uniform(0.0, 12.0);
    const double h = 1e-6;
    const double dc = (kernel_C(d, g + h, l) - kernel_C(d, g - h, l)) / (2 * h);
    const double ds = (kernel_S(d, g + h, l) - kernel_S(d, g - h, l)) / (2 * h);
    CHECK(close(kernel_tC(d, g, l), -dc, 1e-6));
    CHECK(close(kernel_tS(d, g, l), -ds, 1e-6));
  }
}
