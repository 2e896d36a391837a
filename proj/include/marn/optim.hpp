#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "marn/autodiff.hpp"
#include "marn/tensor.hpp"

namespace marn {

struct ClipRange {
  double lo = -5.0;
  double hi = 5.0;
};

// Adam moments for one parameter list. Moment shapes mirror the parameters.
struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_shapes(const std::vector<Shape>& shapes, double learning_rate);
};

// One bias-corrected Adam update. Every gradient component is clamped into
// [clip.lo, clip.hi] before it reaches the moments.
void adam_step(AdamState& state, std::span<Tensor* const> params, std::span<const Tensor> grads, ClipRange clip);

// Loss graph over a list of parameters; must be deterministic.
using ScalarGraph = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
};

// Compares reverse-mode gradients with central differences of step h over
// every coordinate of every parameter. The error of one coordinate is
// |analytic - numeric| / max(1, |analytic|, |numeric|).
GradCheckResult grad_check(const ScalarGraph& f, std::span<Tensor* const> params, double h = 1e-5);

}  // namespace marn
