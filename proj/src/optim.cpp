#include "oscattn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "oscattn/core.hpp"

namespace osc {

double cosine_lr(double base, long step, long total, double warmup_frac) {
  if (total <= 0) throw RangeError("cosine_lr: total steps must be positive");
  const long warm = static_cast<long>(std::ceil(warmup_frac * static_cast<double>(total)));
  if (step < warm) return base * static_cast<double>(step) / static_cast<double>(warm);
  const long span = std::max(1L, total - warm);
  const double x = std::min(1.0, static_cast<double>(step - warm) / static_cast<double>(span));
  return base * 0.5 * (1.0 + std::cos(kPi * x));
}

void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& s, double lr,
                const AdamWConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adamw_step: parameter and gradient sizes differ");
  if (s.m.empty()) {
    s.m.assign(params.size(), 0.0);
    s.v.assign(params.size(), 0.0);
  }
  if (s.m.size() != params.size()) throw ShapeError("adamw_step: optimizer state size mismatch");
  ++s.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    s.m[i] = cfg.beta1 * s.m[i] + (1.0 - cfg.beta1) * grads[i];
    s.v[i] = cfg.beta2 * s.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    params[i] *= 1.0 - lr * cfg.weight_decay;
    params[i] -= lr * (s.m[i] / c1) / (std::sqrt(s.v[i] / c2) + cfg.eps);
  }
}

}  // namespace osc
