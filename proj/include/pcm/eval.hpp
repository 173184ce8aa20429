#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pcm/geometry.hpp"
#include "pcm/scene.hpp"

namespace pcm {

/// Metric distances are reported in units 10x the normalized scene frame.
inline constexpr double kMetricScale = 10.0;
inline constexpr double kDefaultFScoreTau = 0.64;

struct SimilarityTransform {
  double scale = 1.0;
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& x) const { return scale * (rotation * x) + translation; }
  /// Maps a camera-to-world pose through the transform (scale moves the center only).
  PoseMean apply(const PoseMean& pose) const;
};

/// Least-squares similarity taking src onto dst. Needs at least three
/// non-collinear source points.
SimilarityTransform umeyama(std::span<const Vec3> src, std::span<const Vec3> dst);

struct NearestNeighbor {
  int index = -1;
  double distance = 0.0;  // l1
};

/// Uniform-grid index for l1 nearest neighbors. Ties go to the lowest target
/// index, so answers equal an exhaustive scan exactly.
class NearestNeighborIndex {
 public:
  explicit NearestNeighborIndex(std::span<const Vec3> targets);
  NearestNeighbor query(const Vec3& q) const;

 private:
  std::vector<Vec3> points_;
  Vec3 lo_ = Vec3::Zero();
  double cell_ = 1.0;
  std::array<int, 3> dims_{1, 1, 1};
  std::vector<int> cell_start_;
  std::vector<int> cell_items_;

  std::array<int, 3> cell_of(const Vec3& p) const;
};

struct ChamferResult {
  double cd = 0.0;
  double accuracy = 0.0;
  double completeness = 0.0;
};

/// l1 Chamfer distance; all three values scaled by kMetricScale.
ChamferResult chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b);

struct FScoreResult {
  double f = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision of a against b and recall of b against a at threshold tau, with
/// distances in the same scaled units as chamfer_l1.
FScoreResult f_score(std::span<const Vec3> a, std::span<const Vec3> b, double tau = kDefaultFScoreTau);

std::vector<Vec3> sample_surface(const AnalyticScene& scene, int count, std::uint64_t seed);

struct PoseError {
  double rot_deg = 0.0;
  double trans = 0.0;
};

/// Per-camera errors, optionally after a similarity fit of the estimated
/// camera centers onto the true ones (all cameras, outliers included).
std::vector<PoseError> pose_errors(std::span<const PoseMean> est, std::span<const PoseMean> truth, bool aligned);

struct ReconstructionMetrics {
  ChamferResult chamfer;
  FScoreResult fscore;
  SimilarityTransform alignment;
  std::vector<PoseError> pose_errors;
};

/// Full protocol: align estimated cameras to the truth, carry the estimated
/// surface samples through the same transform, then score them.
ReconstructionMetrics evaluate_reconstruction(std::span<const Vec3> est_points, std::span<const PoseMean> est_poses,
                                              std::span<const Vec3> gt_points, std::span<const PoseMean> true_poses,
                                              double tau = kDefaultFScoreTau);

}  // namespace pcm
