#include "marn/optim.hpp"

#include <algorithm>
#include <cmath>

#include "marn/error.hpp"

namespace marn {

AdamState AdamState::for_shapes(const std::vector<Shape>& shapes, double learning_rate) {
  AdamState state;
  state.learning_rate = learning_rate;
  for (const auto& s : shapes) {
    state.first_moment.emplace_back(s, 0.0);
    state.second_moment.emplace_back(s, 0.0);
  }
  return state;
}

void adam_step(AdamState& state, std::span<Tensor* const> params, std::span<const Tensor> grads, ClipRange clip) {
  if (!(clip.lo < clip.hi)) throw ConfigError("clip range needs lo < hi");
  if (params.size() != grads.size() || params.size() != state.first_moment.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                     " grads, " + std::to_string(state.first_moment.size()) + " moment slots");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (params[p]->shape() != grads[p].shape() || params[p]->shape() != state.first_moment[p].shape())
      throw ShapeError("adam_step: parameter " + std::to_string(p) + " has shape " +
                       shape_string(params[p]->shape()) + " but gradient " + shape_string(grads[p].shape()));
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    const Tensor& g = grads[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = std::clamp(g[i], clip.lo, clip.hi);
      if (!(gi >= clip.lo && gi <= clip.hi))
        throw NumericalError("adam_step: gradient component outside the clip range after clamping");
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

namespace {

double evaluate(const ScalarGraph& f, std::span<Tensor* const> params) {
  Tape tape;
  std::vector<Var> vars;
  for (Tensor* p : params) vars.push_back(tape.leaf(*p, false));
  return f(tape, vars).value().item();
}

}  // namespace

GradCheckResult grad_check(const ScalarGraph& f, std::span<Tensor* const> params, double h) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ContractViolation("grad_check: step must lie in [1e-7, 1e-3]");

  Tape tape;
  std::vector<Var> vars;
  for (Tensor* p : params) vars.push_back(tape.leaf(*p, true));
  Var loss = f(tape, vars);
  tape.backward(loss);

  const double base_a = loss.value().item();
  const double base_b = evaluate(f, params);
  if (base_a != base_b) throw ContractViolation("grad_check: loss function is not deterministic");

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Tensor analytic = tape.grad(vars[p]);
    Tensor& w = *params[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double saved = w[i];
      w[i] = saved + h;
      const double plus = evaluate(f, params);
      w[i] = saved - h;
      const double minus = evaluate(f, params);
      w[i] = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double a = analytic[i];
      const double err = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      ++result.coordinates;
      if (result.coordinates == 1 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = p;
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace marn
