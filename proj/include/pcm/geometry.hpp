#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pcm/jet_math.hpp"

namespace pcm {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

template <typename T>
using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Mat3T = Eigen::Matrix<T, 3, 3>;

/// Camera-to-world pose: the camera center sits at `translation` and the
/// optical axis is the third column of the rotation matrix. The rotation is
/// stored as a rotation vector (axis times angle in radians).
struct PoseMean {
  Vec3 rotation = Vec3::Zero();
  Vec3 translation = Vec3::Zero();

  Mat3 rotation_matrix() const;
  const Vec3& center() const { return translation; }
  Vec3 optical_axis() const { return rotation_matrix().col(2); }
};

/// Pinhole intrinsics. Pixel (i, j) covers [i, i+1) x [j, j+1), so its center
/// is at (i + 0.5, j + 0.5).
struct Intrinsics {
  double fx = 64.0;
  double fy = 64.0;
  double cx = 32.0;
  double cy = 32.0;
  int width = 64;
  int height = 64;

  void validate() const;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

inline PixelCoord pixel_center(int col, int row) { return {col + 0.5, row + 0.5}; }

struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();
};

struct Projection {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Rodrigues map. Below 1e-8 rad the second-order Taylor expansion is used so
/// the map (and its derivatives) stays smooth through the origin.
template <typename T>
Mat3T<T> rodrigues(const Vec3T<T>& r) {
  using std::cos;
  using std::sin;
  using std::sqrt;
  Mat3T<T> k;
  k << T(0), -r.z(), r.y(),  //
      r.z(), T(0), -r.x(),    //
      -r.y(), r.x(), T(0);
  const T theta2 = r.dot(r);
  const Mat3T<T> eye = Mat3T<T>::Identity();
  if (value_of(theta2) < 1e-16) return eye + k + T(0.5) * (k * k);
  const T theta = sqrt(theta2);
  const T a = sin(theta) / theta;
  const T b = (T(1) - cos(theta)) / theta2;
  return eye + a * k + b * (k * k);
}

/// Unit world-space direction of the ray through subpixel (u, v).
template <typename T>
Vec3T<T> ray_direction(const Mat3T<T>& rotation, const Intrinsics& k, double u, double v) {
  Vec3T<T> cam(T((u - k.cx) / k.fx), T((v - k.cy) / k.fy), T(1));
  Vec3T<T> d = rotation * cam;
  return d / d.norm();
}

/// Throws InvalidArgument on non-finite input.
Mat3 axis_angle_to_matrix(const Vec3& r);

/// Inverse of the Rodrigues map with angle in [0, pi].
Vec3 matrix_to_axis_angle(const Mat3& rotation);

/// Equivalent rotation vector with norm <= pi.
Vec3 canonicalize_axis_angle(const Vec3& r);

/// Geodesic distance between two rotations, in degrees.
double rotation_angle_deg(const Mat3& a, const Mat3& b);

Ray generate_ray(const PoseMean& pose, const Intrinsics& k, PixelCoord pixel);

/// Throws DegenerateConfiguration when the point lies on the camera plane.
Projection project(const PoseMean& pose, const Intrinsics& k, const Vec3& world);

/// Pose at `center` looking at `target`. Image x points right and y points
/// down; `up` resolves the roll. Falls back to another up vector when the
/// viewing direction is parallel to `up`.
PoseMean look_at(const Vec3& center, const Vec3& target, const Vec3& up = Vec3::UnitZ());

}  // namespace pcm
