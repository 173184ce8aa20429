#include "pcm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pcm/error.hpp"

namespace pcm {

OptimizerState OptimizerState::for_size(std::size_t n, AdamHyper hyper) {
  OptimizerState s;
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  s.hyper = hyper;
  return s;
}

void optimizer_step(OptimizerState& state, std::span<double> params, std::span<const double> grads, double lr,
                    const std::string& group) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw InvalidArgument("optimizer_step: " + group + " shape mismatch");
  }
  const auto& h = state.hyper;
  ++state.step;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    if (!std::isfinite(g)) {
      throw NumericalFailure("optimizer_step: non-finite gradient in " + group + "[" + std::to_string(i) + "]");
    }
    state.m[i] = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    state.v[i] = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    const double next = params[i] - lr * mhat / (std::sqrt(vhat) + h.eps);
    if (!std::isfinite(next)) {
      throw NumericalFailure("optimizer_step: non-finite update in " + group + "[" + std::to_string(i) + "]");
    }
    params[i] = next;
  }
}

double lr_schedule(long t, long total, double base, LrScheduleKind kind, double floor) {
  if (total <= 0) return base;
  const double x = std::clamp(static_cast<double>(t) / static_cast<double>(total), 0.0, 1.0);
  if (kind == LrScheduleKind::kExponential) return base * std::pow(floor, x);
  return base * (floor + (1.0 - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * x)));
}

}  // namespace pcm
