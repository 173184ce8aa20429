#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "pcm/geometry.hpp"

namespace pcm {

struct Sphere {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
  bool learnable = true;
};

/// Union of spheres with a procedural, view-independent color field.
///
/// `field_scale` multiplies the signed distance; 1 gives a true SDF. Other
/// values produce a non-metric field and exist for exercising the Eikonal term.
struct AnalyticScene {
  std::vector<Sphere> spheres;
  std::uint64_t color_seed = 0;
  std::array<double, 3> color_phases{0.0, 0.0, 0.0};
  double field_scale = 1.0;

  static AnalyticScene make(std::vector<Sphere> spheres, std::uint64_t color_seed);

  void validate() const;
  /// Radius of the smallest origin-centered ball containing every sphere.
  double bounding_radius() const;
  int learnable_count() const;
};

/// Frequency of the procedural color pattern.
inline constexpr double kColorFrequency = 7.0;

std::array<double, 3> color_phases_for_seed(std::uint64_t seed);

template <typename T>
struct SphereT {
  Vec3T<T> center;
  T radius;
};

template <typename T>
T sdf_value(const std::vector<SphereT<T>>& spheres, double field_scale, const Vec3T<T>& x) {
  T best = (x - spheres[0].center).norm() - spheres[0].radius;
  for (std::size_t i = 1; i < spheres.size(); ++i) {
    T d = (x - spheres[i].center).norm() - spheres[i].radius;
    if (value_of(d) < value_of(best)) best = d;
  }
  return best * field_scale;
}

template <typename T>
Vec3T<T> color_value(const std::array<double, 3>& phases, const Vec3T<T>& x) {
  using std::sin;
  Vec3T<T> c;
  for (int a = 0; a < 3; ++a) {
    T v = T(0.5) + T(0.4) * sin(kColorFrequency * x[a] + phases[a]);
    if (value_of(v) < 0.0) v = T(0.0);
    if (value_of(v) > 1.0) v = T(1.0);
    c[a] = v;
  }
  return c;
}

double sdf_eval(const AnalyticScene& scene, const Vec3& x);
/// Gradient of the active (closest) primitive. Throws DegenerateConfiguration
/// at a primitive center.
Vec3 sdf_gradient(const AnalyticScene& scene, const Vec3& x);
Vec3 color_eval(const AnalyticScene& scene, const Vec3& x, const Vec3& view_dir);
Vec3 color_eval(const std::array<double, 3>& phases, const Vec3& x);

/// Distance along the ray to the first sphere surface it enters, if any.
std::optional<double> first_hit(const AnalyticScene& scene, const Ray& ray);

/// Points on the zero level set: rejection sampling in the bounding box with
/// |f| < 0.1 followed by Newton projection. Deterministic in `seed`.
std::vector<Vec3> sample_surface_points(const AnalyticScene& scene, int count, std::uint64_t seed);

struct CameraRig {
  std::vector<PoseMean> true_poses;
  std::vector<PoseMean> init_poses;
  std::vector<bool> outlier_flags;
  Intrinsics intrinsics;
  double radius = 3.0;

  int size() const { return static_cast<int>(true_poses.size()); }
  void validate() const;
};

/// Cameras on the upper hemisphere (Fibonacci spacing) looking at the origin.
/// Init poses equal the true poses and no camera is flagged.
CameraRig generate_cameras(const AnalyticScene& scene, int n, double radius, const Intrinsics& k,
                           std::uint64_t seed);

struct OutlierSpec {
  double fraction = 0.25;
  std::pair<double, double> rot_deg{20.0, 30.0};
  std::pair<double, double> trans{0.2, 0.4};
  double inlier_rot_deg = 1.0;
  double inlier_trans = 0.02;

  void validate() const;
};

/// Number of cameras flagged for a given fraction: ceil(fraction * n).
int outlier_count(double fraction, int n);

CameraRig inject_outliers(const CameraRig& rig, const OutlierSpec& spec, std::uint64_t seed);

/// A keypoint correspondence, stored as the integer pixels that contain the
/// observed projections in each view.
struct Correspondence {
  int col_i = 0;
  int row_i = 0;
  int col_j = 0;
  int row_j = 0;
};

struct PairMatches {
  int i = 0;
  int j = 0;
  std::vector<Correspondence> matches;
};

struct MatchTable {
  int n = 0;
  std::vector<int> counts;  // row-major n x n, symmetric, zero diagonal
  std::vector<std::vector<int>> neighborhoods;
  std::vector<PairMatches> pairs;  // i < j, non-empty only

  int count(int i, int j) const { return counts[static_cast<std::size_t>(i) * n + j]; }
  int row_sum(int i) const;
  /// Rebuilds `neighborhoods` from `counts`.
  void derive_neighborhoods();
};

MatchTable simulate_matches(const AnalyticScene& scene, const CameraRig& rig, int n_surface_points,
                            double reproj_threshold_px, std::uint64_t seed);

/// H x W x 3 row-major float image.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;

  Vec3 at(int col, int row) const {
    const std::size_t o = 3 * (static_cast<std::size_t>(row) * width + col);
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }
};

struct GroundTruthImages {
  std::vector<Image> images;
};

struct RenderParams;

/// Renders every camera at its true pose in test mode.
GroundTruthImages render_gt_images(const AnalyticScene& scene, const CameraRig& rig,
                                   const RenderParams& params);

}  // namespace pcm
