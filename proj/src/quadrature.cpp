#include "oscattn/quadrature.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <mutex>

#include "oscattn/core.hpp"

namespace osc {

namespace {

GaussRule build_rule(int n) {
  GaussRule r;
  r.nodes.resize(n);
  r.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = (n == 1) ? 1.0 : n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    r.nodes[i] = -x;
    r.nodes[n - 1 - i] = x;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) r.nodes[n / 2] = 0.0;
  return r;
}

}  // namespace

const GaussRule& gauss_legendre(int n) {
  if (n < 1 || n > kMaxGaussNodes) throw RangeError("gauss_legendre: order must lie in [1, 512]");
  static std::array<std::unique_ptr<GaussRule>, kMaxGaussNodes + 1> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (!cache[n]) cache[n] = std::make_unique<GaussRule>(build_rule(n));
  return *cache[n];
}

double quad_gauss(const std::function<double(double)>& f, double a, double b, int nodes) {
  if (!(b > a)) throw RangeError("quad_gauss: require b > a");
  const GaussRule& r = gauss_legendre(nodes);
  const double mid = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) acc += r.weights[i] * f(mid + half * r.nodes[i]);
  return acc * half;
}

double quad_simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (!(b > a)) throw RangeError("quad_simpson: require b > a");
  if (panels < 1) throw RangeError("quad_simpson: panels must be >= 1");
  std::vector<double> y(panels + 1);
  const double h = (b - a) / panels;
  for (int i = 0; i <= panels; ++i) y[i] = f(i == panels ? b : a + i * h);
  return simpson_uniform(y, h);
}

double simpson_uniform(std::span<const double> y, double h) {
  const std::size_t n = y.size();
  if (n < 2) return 0.0;
  const std::size_t panels = n - 1;
  double acc = 0.0;
  if (panels % 2 == 1) {
    for (std::size_t i = 0; i < n; ++i) acc += (i == 0 || i == panels) ? 0.5 * y[i] : y[i];
    return acc * h;
  }
  acc = y[0] + y[panels];
  for (std::size_t i = 1; i < panels; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * y[i];
  return acc * h / 3.0;
}

double finite_diff(const std::function<double(double)>& f, double x, double h, int order) {
  if (!(h > 0.0)) throw RangeError("finite_diff: h must be positive");
  if (order == 1) return (f(x + h) - f(x - h)) / (2.0 * h);
  if (order == 2) return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
  throw RangeError("finite_diff: order must be 1 or 2");
}

std::vector<double> rk4_integrate(const OdeSystem& sys, std::span<const double> z0, double t0, double t1, int steps,
                                  std::vector<double>* path) {
  if (steps < 1) throw RangeError("rk4_integrate: steps must be >= 1");
  if (!(t1 >= t0)) throw RangeError("rk4_integrate: require t1 >= t0");
  const std::size_t n = static_cast<std::size_t>(sys.dim);
  if (z0.size() != n) throw ShapeError("rk4_integrate: state size mismatch");
  std::vector<double> z(z0.begin(), z0.end()), k1(n), k2(n), k3(n), k4(n), tmp(n);
  if (path) {
    path->clear();
    path->reserve((steps + 1) * n);
    path->insert(path->end(), z.begin(), z.end());
  }
  const double h = (t1 - t0) / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * h;
    sys.rhs(t, z, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * h * k1[i];
    sys.rhs(t + 0.5 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + 0.5 * h * k2[i];
    sys.rhs(t + 0.5 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = z[i] + h * k3[i];
    sys.rhs(t + h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (path) path->insert(path->end(), z.begin(), z.end());
  }
  return z;
}

}  // namespace osc
