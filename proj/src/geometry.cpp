#include "pcm/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pcm/error.hpp"

namespace pcm {

Mat3 PoseMean::rotation_matrix() const { return rodrigues<double>(rotation); }

void Intrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw InvalidArgument("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidArgument("intrinsics: image size must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw InvalidArgument("intrinsics: principal point outside the image");
  }
}

Mat3 axis_angle_to_matrix(const Vec3& r) {
  if (!r.allFinite()) throw InvalidArgument("axis_angle_to_matrix: non-finite rotation vector");
  return rodrigues<double>(r);
}

Vec3 matrix_to_axis_angle(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.axis() * aa.angle();
}

Vec3 canonicalize_axis_angle(const Vec3& r) {
  const double angle = r.norm();
  if (angle <= std::numbers::pi) return r;
  return matrix_to_axis_angle(axis_angle_to_matrix(r));
}

double rotation_angle_deg(const Mat3& a, const Mat3& b) {
  const Mat3 rel = a * b.transpose();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos loses precision near 0; recover the small-angle branch from the
  // skew part instead.
  const Vec3 skew(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  const double angle = std::atan2(0.5 * skew.norm(), c);
  return angle * 180.0 / std::numbers::pi;
}

Ray generate_ray(const PoseMean& pose, const Intrinsics& k, PixelCoord pixel) {
  if (!(pixel.u >= 0.0 && pixel.u < k.width && pixel.v >= 0.0 && pixel.v < k.height)) {
    throw InvalidArgument("generate_ray: pixel (" + std::to_string(pixel.u) + ", " +
                          std::to_string(pixel.v) + ") outside the image");
  }
  Ray ray;
  ray.origin = pose.translation;
  ray.direction = ray_direction<double>(pose.rotation_matrix(), k, pixel.u, pixel.v);
  return ray;
}

Projection project(const PoseMean& pose, const Intrinsics& k, const Vec3& world) {
  if (!world.allFinite()) throw InvalidArgument("project: non-finite point");
  const Vec3 cam = pose.rotation_matrix().transpose() * (world - pose.translation);
  if (std::abs(cam.z()) < 1e-9) throw DegenerateConfiguration("project: point on the camera plane");
  return {k.fx * cam.x() / cam.z() + k.cx, k.fy * cam.y() / cam.z() + k.cy, cam.z()};
}

PoseMean look_at(const Vec3& center, const Vec3& target, const Vec3& up) {
  const Vec3 forward = (target - center).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Mat3 rot;
  rot.col(0) = right;
  rot.col(1) = down;
  rot.col(2) = forward;
  return {matrix_to_axis_angle(rot), center};
}

}  // namespace pcm
