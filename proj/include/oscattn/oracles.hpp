#pragma once

// Solver-based attention layer. Same projections, query fits, softmax and
// output stage as layer_forward, but every (key, output-time) pair integrates
// its key and value trajectories with fixed-step RK4 and averages them with
// composite Simpson on the S + 1 solver nodes.

#include <cstddef>
#include <vector>

#include "oscattn/attention.hpp"
#include "oscattn/quadrature.hpp"

namespace osc {

/// First-order field k' = tanh(W k + b) of width d_head.
struct DenseTanhField {
  Matrix W;
  std::vector<double> b;
};

DenseTanhField random_dense_field(std::size_t width, Rng& rng, double scale = 1.0);

/// Vector field used by the baseline. `linear` integrates the driven
/// oscillators of each head, so the closed-form layer is its exact limit.
struct BaselineField {
  enum class Kind { linear, dense_tanh };
  Kind kind = Kind::linear;
  std::vector<DenseTanhField> key;    // one per head (dense_tanh only)
  std::vector<DenseTanhField> value;  // one per head (dense_tanh only)
};

BaselineField random_dense_baseline(const LayerParams& params, Rng& rng, double scale = 1.0);

/// Instrumentation of the solver path storage.
struct PathProbe {
  std::size_t peak_path_bytes = 0;
  std::size_t path_allocations = 0;
  std::size_t rhs_evaluations = 0;
};

struct NumericTrace {
  std::vector<AttentionResult> heads;
  PathProbe probe;
};

/// Driven oscillator system of one head trajectory; state (x_0, v_0, x_1, v_1, ...).
OdeSystem oscillator_system(const KeyTrajectory<double>& k);

/// S >= 2 solver steps per pair; an odd S averages with the trapezoid rule.
Matrix numerical_attention_layer(const Matrix& tokens, const TimeGrid& grid, const LayerParams& params, int S,
                                 const BaselineField& field = {}, NumericTrace* trace = nullptr);

}  // namespace osc
