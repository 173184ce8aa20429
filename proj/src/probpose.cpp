#include "pcm/probpose.hpp"

#include <cmath>
#include <string>

#include "pcm/error.hpp"

namespace pcm {

void ProbabilisticPoseBank::validate() const {
  if (log_var_rot.size() != means.size() || log_var_trans.size() != means.size()) {
    throw InvalidArgument("pose bank: mean and log-variance counts differ");
  }
}

std::pair<std::vector<Vec3>, std::vector<Vec3>> init_uncertainty(std::span<const double> gamma0,
                                                                 double base_variance) {
  if (!(base_variance > 0.0)) throw InvalidArgument("init_uncertainty: base variance must be positive");
  if (gamma0.empty()) throw InvalidArgument("init_uncertainty: no cameras");
  double mean_inv = 0.0;
  for (std::size_t i = 0; i < gamma0.size(); ++i) {
    if (!(gamma0[i] > 0.0)) {
      throw InvalidArgument("init_uncertainty: confidence of camera " + std::to_string(i) + " is not positive");
    }
    mean_inv += 1.0 / gamma0[i];
  }
  mean_inv /= static_cast<double>(gamma0.size());
  std::vector<Vec3> rot;
  std::vector<Vec3> trans;
  rot.reserve(gamma0.size());
  trans.reserve(gamma0.size());
  for (double g : gamma0) {
    const double s = (1.0 / g) / mean_inv;
    const Vec3 v = Vec3::Constant(std::log(base_variance) + std::log(s));
    rot.push_back(v);
    trans.push_back(v);
  }
  return {std::move(rot), std::move(trans)};
}

ProbabilisticPoseBank make_bank(std::vector<PoseMean> means, std::span<const double> gamma0,
                                double base_variance) {
  if (means.size() != gamma0.size()) throw InvalidArgument("make_bank: pose and confidence counts differ");
  ProbabilisticPoseBank bank;
  bank.means = std::move(means);
  std::tie(bank.log_var_rot, bank.log_var_trans) = init_uncertainty(gamma0, base_variance);
  return bank;
}

double uncertainty_magnitude(const ProbabilisticPoseBank& bank, int i) {
  const auto u = static_cast<std::size_t>(i);
  const Vec3& lr = bank.log_var_rot[u];
  const Vec3& lt = bank.log_var_trans[u];
  double s = 0.0;
  for (int a = 0; a < 3; ++a) s += std::exp(lr[a]) + std::exp(lt[a]);
  return s / 6.0;
}

double damping_factor(double sigma_bar, double kappa) { return 1.0 / (1.0 + sigma_bar * kappa); }

UncertaintySummary summarize(const ProbabilisticPoseBank& bank, double kappa) {
  UncertaintySummary out;
  for (int i = 0; i < bank.size(); ++i) {
    const double s = uncertainty_magnitude(bank, i);
    out.sigma_bar.push_back(s);
    out.damping.push_back(damping_factor(s, kappa));
  }
  return out;
}

namespace {
void check_lengths(const ProbabilisticPoseBank& bank, std::span<const double> gamma) {
  if (gamma.size() != bank.means.size()) {
    throw InvalidArgument("uncertainty loss: " + std::to_string(gamma.size()) + " confidences for " +
                          std::to_string(bank.means.size()) + " cameras");
  }
}
}  // namespace

double uncertainty_loss(const ProbabilisticPoseBank& bank, std::span<const double> gamma) {
  check_lengths(bank, gamma);
  if (gamma.empty()) return 0.0;
  double sum = 0.0;
  for (int i = 0; i < bank.size(); ++i) {
    sum += std::abs(uncertainty_magnitude(bank, i) - (1.0 - gamma[static_cast<std::size_t>(i)]));
  }
  return sum / static_cast<double>(gamma.size());
}

LogVarianceGradient analytic_unc_gradient(const ProbabilisticPoseBank& bank, std::span<const double> gamma) {
  check_lengths(bank, gamma);
  const double n = static_cast<double>(bank.size());
  LogVarianceGradient g;
  g.rot.assign(bank.means.size(), Vec3::Zero());
  g.trans.assign(bank.means.size(), Vec3::Zero());
  for (int i = 0; i < bank.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    const double residual = uncertainty_magnitude(bank, i) - (1.0 - gamma[u]);
    const double sign = residual > 0.0 ? 1.0 : (residual < 0.0 ? -1.0 : 0.0);
    for (int a = 0; a < 3; ++a) {
      g.rot[u][a] = sign * std::exp(bank.log_var_rot[u][a]) / (6.0 * n);
      g.trans[u][a] = sign * std::exp(bank.log_var_trans[u][a]) / (6.0 * n);
    }
  }
  return g;
}

}  // namespace pcm
