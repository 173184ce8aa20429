#pragma once

#include <span>
#include <string>
#include <vector>

namespace pcm {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for one parameter group.
struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
  AdamHyper hyper;

  static OptimizerState for_size(std::size_t n, AdamHyper hyper = {});
};

/// One Adam update in place. Throws NumericalFailure, naming `group` and the
/// index, when a gradient or the resulting parameter is not finite.
void optimizer_step(OptimizerState& state, std::span<double> params, std::span<const double> grads, double lr,
                    const std::string& group = "params");

enum class LrScheduleKind { kCosine, kExponential };

/// Learning rate at iteration t: cosine decay from `base` to base * floor at
/// t = total, or exponential decay base * floor^(t / total).
double lr_schedule(long t, long total, double base, LrScheduleKind kind, double floor = 1e-2);

}  // namespace pcm
