#pragma once

#include <array>
#include <span>
#include <vector>

#include "pcm/geometry.hpp"

namespace pcm {

/// Per-camera Gaussian pose distribution with diagonal covariance: a learnable
/// mean pose plus per-axis log-variances for rotation and translation.
/// Variances are exp(log_var), so they are positive for any finite value.
struct ProbabilisticPoseBank {
  std::vector<PoseMean> means;
  std::vector<Vec3> log_var_rot;
  std::vector<Vec3> log_var_trans;

  int size() const { return static_cast<int>(means.size()); }
  void validate() const;
};

/// Gradients of a loss with respect to the log-variances only. There is
/// deliberately no slot for the confidence targets.
struct LogVarianceGradient {
  std::vector<Vec3> rot;
  std::vector<Vec3> trans;
};

/// Floor applied to static confidences before they enter the inverse-weighting.
inline constexpr double kConfidenceFloor = 1e-3;

/// Base per-axis variance.
inline constexpr double kDefaultBaseVariance = 0.01;
/// Damping sensitivity.
inline constexpr double kDefaultKappa = 5.0;

/// Log-variance initialization inversely proportional to the static
/// confidence: s_i = (1/g_i) / mean_j(1/g_j), log_var = log(base) + log(s_i)
/// on every axis of both blocks. Returns (rotation, translation) blocks.
std::pair<std::vector<Vec3>, std::vector<Vec3>> init_uncertainty(std::span<const double> gamma0,
                                                                 double base_variance);

ProbabilisticPoseBank make_bank(std::vector<PoseMean> means, std::span<const double> gamma0,
                                double base_variance);

/// Mean of the six per-axis variances of camera i.
double uncertainty_magnitude(const ProbabilisticPoseBank& bank, int i);

/// 1 / (1 + sigma_bar * kappa).
double damping_factor(double sigma_bar, double kappa);

struct UncertaintySummary {
  std::vector<double> sigma_bar;
  std::vector<double> damping;
};

UncertaintySummary summarize(const ProbabilisticPoseBank& bank, double kappa);

/// (1/N) sum_i |sigma_bar_i - (1 - gamma_i)|.
double uncertainty_loss(const ProbabilisticPoseBank& bank, std::span<const double> gamma);

/// Closed-form gradient of uncertainty_loss with respect to the log-variances,
/// with gamma held constant. The subgradient at the kink is zero.
LogVarianceGradient analytic_unc_gradient(const ProbabilisticPoseBank& bank, std::span<const double> gamma);

}  // namespace pcm
