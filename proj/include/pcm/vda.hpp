#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "pcm/random.hpp"
#include "pcm/renderer.hpp"

namespace pcm {

inline constexpr int kDefaultTopK = 8;
inline constexpr int kDefaultGridResolution = 64;
inline constexpr int kDefaultMatchesPerPair = 16;
inline constexpr double kIouEps = 1e-8;

/// Kernel width sigma_g = 6 / R.
inline double default_kernel_sigma(int resolution) { return 6.0 / resolution; }

struct WeightedPointSet {
  std::vector<Vec3> points;
  std::vector<double> weights;  // sum to 1
};

/// Indices of the k largest weights, ties broken by smaller depth (earlier
/// sample). Throws DegenerateConfiguration when every weight is zero.
std::vector<int> top_k_indices(std::span<const double> weights, std::span<const double> depths, int k);

WeightedPointSet top_k_points(const RayRenderResult& result, int k);

/// Regular R^3 lattice over the union bounding box padded by 3 sigma.
struct GridGeometry {
  int resolution = 0;
  double sigma = 0.0;
  Vec3 origin = Vec3::Zero();   // corner of the box
  Vec3 extent = Vec3::Zero();   // side lengths of the box
  Vec3 bbox_min = Vec3::Zero();
  Vec3 bbox_max = Vec3::Zero();

  double spacing(int axis) const { return extent[axis] / resolution; }
  double voxel_center(int axis, int index) const { return origin[axis] + (index + 0.5) * spacing(axis); }
  bool same_as(const GridGeometry& o) const;
};

GridGeometry build_grid(const WeightedPointSet& a, const WeightedPointSet& b, int resolution, double sigma);

struct VoxelDensityGrid {
  GridGeometry geometry;
  std::vector<double> values;  // x fastest, then y, then z

  double at(int i, int j, int l) const {
    const auto r = static_cast<std::size_t>(geometry.resolution);
    return values[(static_cast<std::size_t>(l) * r + static_cast<std::size_t>(j)) * r + static_cast<std::size_t>(i)];
  }
};

/// Sum of unit-peak Gaussians, one per point, scaled by the point weights.
/// Contributions beyond `cutoff_sigmas` standard deviations are dropped; the
/// default keeps the full kernel.
VoxelDensityGrid voxelize_mog(const WeightedPointSet& set, const GridGeometry& geometry,
                              double cutoff_sigmas = std::numeric_limits<double>::infinity());

/// 1 - sum(min) / (sum(max) + eps). Throws InvalidArgument when the grids do
/// not share a geometry.
double iou_loss(const VoxelDensityGrid& a, const VoxelDensityGrid& b);

/// IoU loss of two weighted point sets on their shared grid, with the exact
/// gradient with respect to every point position and (renormalized) weight,
/// including the dependence of the grid box on the points.
struct IouEvaluation {
  double loss = 0.0;
  std::vector<Vec3> d_points_a;
  std::vector<double> d_weights_a;
  std::vector<Vec3> d_points_b;
  std::vector<double> d_weights_b;
};

IouEvaluation iou_loss_with_gradient(const WeightedPointSet& a, const WeightedPointSet& b, int resolution,
                                     double sigma);

struct VdaParams {
  int top_k = kDefaultTopK;
  int resolution = kDefaultGridResolution;
  double sigma = default_kernel_sigma(kDefaultGridResolution);
  int n_match = kDefaultMatchesPerPair;
};

struct MatchedRay {
  Correspondence match;
  Vec3 target_i = Vec3::Zero();
  Vec3 target_j = Vec3::Zero();
  std::vector<double> jitter_i;
  std::vector<double> jitter_j;
};

/// Joint evaluation of a view pair's matched rays: the volumetric IoU loss
/// (mean over usable matches) and the photometric loss of the same rays,
/// each with its own gradient.
struct PairEvaluation {
  double iou = 0.0;
  ModelGradient iou_grad;
  int usable = 0;
  int skipped = 0;
  double color = 0.0;
  ModelGradient color_grad;
  std::vector<Vec3> colors_i;
  std::vector<Vec3> colors_j;
};

PairEvaluation vda_pair_loss(const AnalyticScene& scene, std::span<const PoseMean> means, const Intrinsics& k,
                             int cam_i, int cam_j, std::span<const MatchedRay> matches,
                             const RenderParams& params, const VdaParams& vda);

/// Draws min(n_match, available) distinct correspondences.
std::vector<Correspondence> sample_matches(std::span<const Correspondence> matches, int n_match, Rng& rng);

}  // namespace pcm
