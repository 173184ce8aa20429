#pragma once

// Central finite-difference oracle. Independent of every production
// gradient path: it only calls the loss as a black box.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pcm::testkit {

class OracleFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct FiniteDiffResult {
  std::vector<double> gradient;
  /// One-sided slopes disagree in sign: the point sits on (or next to) a kink.
  std::vector<bool> near_kink;
};

struct FiniteDiffOracle {
  double h = 1e-5;

  FiniteDiffResult gradient(const std::function<double(const std::vector<double>&)>& loss,
                            const std::vector<double>& params) const {
    if (!(h >= 1e-8 && h <= 1e-2)) throw OracleFailure("finite difference step outside [1e-8, 1e-2]");
    FiniteDiffResult out;
    out.gradient.resize(params.size());
    out.near_kink.resize(params.size());
    const double f0 = loss(params);
    if (!std::isfinite(f0)) throw OracleFailure("non-finite loss at the base point");
    std::vector<double> x = params;
    for (std::size_t i = 0; i < params.size(); ++i) {
      x[i] = params[i] + h;
      const double fp = loss(x);
      x[i] = params[i] - h;
      const double fm = loss(x);
      x[i] = params[i];
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw OracleFailure("non-finite probe at coordinate " + std::to_string(i));
      }
      out.gradient[i] = (fp - fm) / (2.0 * h);
      const double fwd = (fp - f0) / h;
      const double bwd = (f0 - fm) / h;
      const double scale = std::max(std::abs(fwd), std::abs(bwd));
      out.near_kink[i] = scale > 0.0 && fwd * bwd < 0.0 && std::abs(fwd - bwd) > 1e-3 * scale;
    }
    return out;
  }
};

/// max_i |a_i - b_i| / max(|b|_inf, floor): relative error against the
/// largest reference component.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-12) {
  double num = 0.0;
  double den = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num = std::max(num, std::abs(a[i] - b[i]));
    den = std::max(den, std::abs(b[i]));
  }
  return num / den;
}

}  // namespace pcm::testkit
