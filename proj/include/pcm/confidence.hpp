#pragma once

#include <deque>
#include <span>
#include <vector>

#include "pcm/scene.hpp"

namespace pcm {

/// Denominator guard of the min-max normalizations.
inline constexpr double kNormalizationEps = 1e-5;
inline constexpr double kDefaultBlendAlpha = 0.7;
inline constexpr int kDefaultBufferCapacity = 100;

/// Mean match count over each camera's neighborhood; 0 for isolated cameras.
std::vector<double> static_reliability(const MatchTable& matches);

/// Min-max normalization to [0, 1] followed by the confidence floor.
std::vector<double> normalize_confidence(std::span<const double> eta);

/// Buffer width spanning roughly one pass over the pair list: floor(3 * pairs / n).
int pair_epoch_buffer_capacity(const MatchTable& matches);

/// PSNR in dB for colors in [0, 1]; mse is clamped below at 1e-10.
double psnr_from_mse(double mse);

/// Blends static confidences with a rolling rendering-quality score.
class ConfidenceTracker {
 public:
  ConfidenceTracker(std::vector<double> gamma0, double alpha = kDefaultBlendAlpha,
                    int buffer_capacity = kDefaultBufferCapacity);

  void record_psnr(int view, double mse);
  /// Recomputes the blended confidences from the current buffers.
  const std::vector<double>& update_dynamic();

  int size() const { return static_cast<int>(gamma0_.size()); }
  const std::vector<double>& gamma0() const { return gamma0_; }
  const std::vector<double>& gamma_hat() const { return gamma_hat_; }
  const std::vector<double>& gamma() const { return gamma_; }
  const std::deque<double>& buffer(int view) const { return buffers_[static_cast<std::size_t>(view)]; }
  double alpha() const { return alpha_; }
  int buffer_capacity() const { return capacity_; }
  int updates() const { return updates_; }

 private:
  std::vector<double> gamma0_;
  std::vector<std::deque<double>> buffers_;
  std::vector<double> gamma_hat_;
  std::vector<double> gamma_;
  double alpha_;
  int capacity_;
  int updates_ = 0;
};

}  // namespace pcm
