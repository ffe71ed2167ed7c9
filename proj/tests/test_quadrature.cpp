#include <doctest.h>

#include <vector>

#include "helpers.hpp"
#include "oscattn/quadrature.hpp"

using namespace osc;
using osc::testing::close;

TEST_CASE("gauss-legendre rules integrate polynomials exactly") {
  for (int n : {1, 2, 3, 7, 64, 256, 512}) {
    const auto& r = gauss_legendre(n);
    double wsum = 0.0;
    for (double w : r.weights) wsum += w;
    CHECK(close(wsum, 2.0, 1e-13));
    // x^(2n-2) integrates to 2/(2n-1).
    if (n <= 20) {
      const int k = 2 * n - 2;
      const double v = quad_gauss([&](double x) { return std::pow(x, k); }, -1, 1, n);
      CHECK(close(v, 2.0 / (k + 1), 1e-13));
    }
  }
  CHECK_THROWS_AS(gauss_legendre(0), RangeError);
  CHECK_THROWS_AS(gauss_legendre(513), RangeError);
}

TEST_CASE("quadrature examples") {
  CHECK(close(quad_gauss([](double x) { return std::sin(x); }, 0, kPi, 64), 2.0, 1e-12));
  CHECK(quad_gauss([](double) { return 1.0; }, 0, 1, 16) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(quad_simpson([](double) { return 1.0; }, 0, 1, 10) == doctest::Approx(1.0).epsilon(1e-15));
  auto f = [](double s) { return std::exp(-s) * std::cos(7 * s); };
  CHECK(close(quad_gauss(f, 0, 1, 256), quad_simpson(f, 0, 1, 4096), 1e-10));
  CHECK_THROWS_AS(quad_gauss(f, 1, 0, 8), RangeError);
  CHECK_THROWS_AS(quad_simpson(f, 0, 1, 0), RangeError);
}

TEST_CASE("simpson converges at fourth order and odd panel counts fall back to trapezoid") {
  auto f = [](double s) { return std::exp(s); };
  const double exact = std::exp(1.0) - 1.0;
  const double e1 = std::abs(quad_simpson(f, 0, 1, 16) - exact);
  const double e2 = std::abs(quad_simpson(f, 0, 1, 32) - exact);
  CHECK(e1 / e2 > 14.0);
  CHECK(e1 / e2 < 18.0);
  const double t1 = std::abs(quad_simpson(f, 0, 1, 15) - exact);
  const double t2 = std::abs(quad_simpson(f, 0, 1, 31) - exact);
  CHECK(t1 / t2 > 3.5);
}

TEST_CASE("finite_diff examples") {
  CHECK(close(finite_diff([](double x) { return x * x; }, 3.0, 1e-5, 1), 6.0, 1e-8));
  CHECK(finite_diff([](double) { return 4.0; }, 1.0, 1e-3, 1) == 0.0);
  CHECK(close(finite_diff([](double x) { return std::sin(x); }, 0.0, 1e-4, 2), 0.0, 1e-6));
  CHECK_THROWS_AS(finite_diff([](double x) { return x; }, 0.0, 0.0, 1), RangeError);
  CHECK_THROWS_AS(finite_diff([](double x) { return x; }, 0.0, 1e-3, 3), RangeError);
}

TEST_CASE("rk4 examples") {
  OdeSystem still{2, [](double, std::span<const double>, std::span<double> dz) { dz[0] = dz[1] = 0.0; }};
  const std::vector<double> z0{1.5, -2.0};
  CHECK(rk4_integrate(still, z0, 0, 3, 10) == z0);

  OdeSystem osc1{2, [](double, std::span<const double> z, std::span<double> dz) {
                   dz[0] = z[1];
                   dz[1] = -z[0];
                 }};
  const std::vector<double> u0{1.0, 0.0};
  const auto u1 = rk4_integrate(osc1, u0, 0, 2 * kPi, 4096);
  const double energy = 0.5 * (u1[0] * u1[0] + u1[1] * u1[1]);
  CHECK(std::abs(energy - 0.5) / 0.5 <= 1e-10);

  // Damped driven instance: halving the step shrinks the error ~16x.
  OdeSystem drv{2, [](double t, std::span<const double> z, std::span<double> dz) {
                  dz[0] = z[1];
                  dz[1] = std::cos(1.7 * t) - 2 * 0.3 * z[1] - 2.0 * 2.0 * z[0];
                }};
  const std::vector<double> d0{0.4, -0.2};
  const auto ref = rk4_integrate(drv, d0, 0, 3, 65536);
  const double ea = std::abs(rk4_integrate(drv, d0, 0, 3, 64)[0] - ref[0]);
  const double eb = std::abs(rk4_integrate(drv, d0, 0, 3, 128)[0] - ref[0]);
  CHECK(ea / eb >= 12.0);
  CHECK(ea / eb <= 20.0);

  std::vector<double> path;
  rk4_integrate(drv, d0, 0, 1, 8, &path);
  CHECK(path.size() == 18);
  CHECK_THROWS_AS(rk4_integrate(drv, d0, 1, 0, 8), RangeError);
  CHECK_THROWS_AS(rk4_integrate(drv, d0, 0, 1, 0), RangeError);
}
