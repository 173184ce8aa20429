#pragma once

#include <cmath>

namespace pcm::testkit {

/// Textbook scalar Adam.
struct ReferenceAdam {
  double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  int t = 0;

  double step(double x, double g) {
    ++t;
    m = beta1 * m + (1 - beta1) * g;
    v = beta2 * v + (1 - beta2) * g * g;
    const double mhat = m / (1 - std::pow(beta1, t));
    const double vhat = v / (1 - std::pow(beta2, t));
    return x - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

}  // namespace pcm::testkit
