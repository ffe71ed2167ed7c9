#pragma once

// Numerical ground truth used by the tests and the solver baseline:
// Gauss-Legendre and composite Simpson quadrature, classic RK4 and central
// finite differences.

#include <functional>
#include <span>
#include <vector>

namespace osc {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int kMaxGaussNodes = 512;

/// Rules are computed once per order by Newton iteration and cached.
const GaussRule& gauss_legendre(int n);

double quad_gauss(const std::function<double(double)>& f, double a, double b, int nodes = 256);

/// Composite Simpson on `panels` panels; an odd count falls back to the
/// composite trapezoid rule.
double quad_simpson(const std::function<double(double)>& f, double a, double b, int panels);

/// Same rules applied to samples on a uniform grid of samples.size() nodes.
double simpson_uniform(std::span<const double> samples, double h);

/// Central difference of order 1 or 2.
double finite_diff(const std::function<double(double)>& f, double x, double h, int order = 1);

/// First-order system z' = rhs(t, z).
struct OdeSystem {
  int dim = 0;
  std::function<void(double t, std::span<const double> z, std::span<double> dz)> rhs;
};

/// Fixed-step classic RK4 from t0 to t1. If `path` is non-null it receives
/// steps + 1 states, row-major.
std::vector<double> rk4_integrate(const OdeSystem& sys, std::span<const double> z0, double t0, double t1, int steps,
                                  std::vector<double>* path = nullptr);

}  // namespace osc
