#pragma once

// AdamW with decoupled weight decay and a cosine schedule with linear warmup.

#include <span>
#include <vector>

namespace osc {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double warmup_frac = 0.05;
};

struct AdamWState {
  std::vector<double> m, v;
  long t = 0;
};

/// Learning rate at `step` of `total`: linear ramp from 0 over the warmup
/// steps, then cosine decay to 0.
double cosine_lr(double base, long step, long total, double warmup_frac);

/// One update in place. `lr` is the scheduled rate for this step.
void adamw_step(std::span<double> params, std::span<const double> grads, AdamWState& state, double lr,
                const AdamWConfig& cfg);

}  // namespace osc
