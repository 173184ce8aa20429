#include "pcm/confidence.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pcm/error.hpp"
#include "pcm/probpose.hpp"

namespace pcm {

std::vector<double> static_reliability(const MatchTable& matches) {
  std::vector<double> eta(static_cast<std::size_t>(matches.n), 0.0);
  for (int i = 0; i < matches.n; ++i) {
    double sum = 0.0;
    int k = 0;
    for (int j = 0; j < matches.n; ++j) {
      const int c = matches.count(i, j);
      if (c > 0) {
        sum += c;
        ++k;
      }
    }
    eta[static_cast<std::size_t>(i)] = k > 0 ? sum / k : 0.0;
  }
  return eta;
}

std::vector<double> normalize_confidence(std::span<const double> eta) {
  if (eta.empty()) throw InvalidArgument("normalize_confidence: empty input");
  const auto [lo, hi] = std::minmax_element(eta.begin(), eta.end());
  std::vector<double> g;
  g.reserve(eta.size());
  for (double e : eta) g.push_back(std::max((e - *lo) / (*hi - *lo + kNormalizationEps), kConfidenceFloor));
  return g;
}

int pair_epoch_buffer_capacity(const MatchTable& matches) {
  if (matches.n <= 0) return 1;
  return std::max(1, static_cast<int>(3 * matches.pairs.size()) / matches.n);
}

double psnr_from_mse(double mse) { return 10.0 * std::log10(1.0 / std::max(mse, 1e-10)); }

ConfidenceTracker::ConfidenceTracker(std::vector<double> gamma0, double alpha, int buffer_capacity)
    : gamma0_(std::move(gamma0)), alpha_(alpha), capacity_(buffer_capacity) {
  if (!(alpha_ >= 0.0 && alpha_ <= 1.0)) throw InvalidArgument("confidence: alpha must be in [0, 1]");
  if (capacity_ < 1) throw InvalidArgument("confidence: buffer capacity must be positive");
  for (double g : gamma0_) {
    if (!(g >= 0.0 && g <= 1.0)) throw InvalidArgument("confidence: static confidences must be in [0, 1]");
  }
  buffers_.resize(gamma0_.size());
  gamma_hat_ = gamma0_;
  gamma_ = gamma0_;
}

void ConfidenceTracker::record_psnr(int view, double mse) {
  if (view < 0 || view >= size()) throw InvalidArgument("record_psnr: invalid view index " + std::to_string(view));
  auto& b = buffers_[static_cast<std::size_t>(view)];
  b.push_back(psnr_from_mse(mse));
  while (static_cast<int>(b.size()) > capacity_) b.pop_front();
}

const std::vector<double>& ConfidenceTracker::update_dynamic() {
  ++updates_;
  std::vector<double> mean(gamma0_.size(), 0.0);
  std::vector<int> active;
  for (std::size_t i = 0; i < buffers_.size(); ++i) {
    const auto& b = buffers_[i];
    if (b.empty()) continue;
    mean[i] = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
    active.push_back(static_cast<int>(i));
  }
  gamma_hat_ = gamma0_;
  gamma_ = gamma0_;
  if (active.size() >= 2) {
    double lo = mean[static_cast<std::size_t>(active[0])];
    double hi = lo;
    for (int i : active) {
      lo = std::min(lo, mean[static_cast<std::size_t>(i)]);
      hi = std::max(hi, mean[static_cast<std::size_t>(i)]);
    }
    for (int i : active) {
      const auto u = static_cast<std::size_t>(i);
      gamma_hat_[u] = (mean[u] - lo) / (hi - lo + kNormalizationEps);
    }
  }
  // A single populated buffer has no spread to normalize against; it keeps
  // its static confidence as the dynamic score.
  for (int i : active) {
    const auto u = static_cast<std::size_t>(i);
    gamma_[u] = std::clamp((1.0 - alpha_) * gamma0_[u] + alpha_ * gamma_hat_[u], 0.0, 1.0);
  }
  return gamma_;
}

}  // namespace pcm
