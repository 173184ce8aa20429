#include "pcm/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "pcm/error.hpp"
#include "pcm/random.hpp"

namespace pcm {

namespace {

std::vector<SphereT<double>> as_plain(const AnalyticScene& scene) {
  std::vector<SphereT<double>> out;
  out.reserve(scene.spheres.size());
  for (const auto& s : scene.spheres) out.push_back({s.center, s.radius});
  return out;
}

Vec3 random_unit_vector(Rng& rng) {
  const double z = uniform(rng, -1.0, 1.0);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

std::size_t active_sphere(const AnalyticScene& scene, const Vec3& x) {
  std::size_t best = 0;
  double best_d = (x - scene.spheres[0].center).norm() - scene.spheres[0].radius;
  for (std::size_t i = 1; i < scene.spheres.size(); ++i) {
    const double d = (x - scene.spheres[i].center).norm() - scene.spheres[i].radius;
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace

std::array<double, 3> color_phases_for_seed(std::uint64_t seed) {
  Rng rng = make_rng(seed, stream::kColor);
  std::array<double, 3> p{};
  for (double& v : p) v = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  return p;
}

AnalyticScene AnalyticScene::make(std::vector<Sphere> spheres, std::uint64_t color_seed) {
  AnalyticScene s;
  s.spheres = std::move(spheres);
  s.color_seed = color_seed;
  s.color_phases = color_phases_for_seed(color_seed);
  return s;
}

void AnalyticScene::validate() const {
  if (spheres.empty()) throw InvalidArgument("scene: at least one sphere is required");
  for (std::size_t i = 0; i < spheres.size(); ++i) {
    const auto& s = spheres[i];
    if (!s.center.allFinite() || !std::isfinite(s.radius)) {
      throw InvalidArgument("scene: sphere " + std::to_string(i) + " is not finite");
    }
    if (!(s.radius > 0.0)) throw InvalidArgument("scene: sphere " + std::to_string(i) + " radius must be positive");
  }
  if (bounding_radius() > 1.0 + 1e-9) throw InvalidArgument("scene: geometry exceeds the unit bounding sphere");
  if (!(field_scale > 0.0)) throw InvalidArgument("scene: field_scale must be positive");
}

double AnalyticScene::bounding_radius() const {
  double r = 0.0;
  for (const auto& s : spheres) r = std::max(r, s.center.norm() + s.radius);
  return r;
}

int AnalyticScene::learnable_count() const {
  return static_cast<int>(std::count_if(spheres.begin(), spheres.end(), [](const Sphere& s) { return s.learnable; }));
}

double sdf_eval(const AnalyticScene& scene, const Vec3& x) {
  return sdf_value<double>(as_plain(scene), scene.field_scale, x);
}

Vec3 sdf_gradient(const AnalyticScene& scene, const Vec3& x) {
  const auto& s = scene.spheres[active_sphere(scene, x)];
  const Vec3 d = x - s.center;
  const double n = d.norm();
  if (n < 1e-12) throw DegenerateConfiguration("sdf_gradient: point at a primitive center");
  return scene.field_scale * d / n;
}

Vec3 color_eval(const std::array<double, 3>& phases, const Vec3& x) { return color_value<double>(phases, x); }

Vec3 color_eval(const AnalyticScene& scene, const Vec3& x, const Vec3& /*view_dir*/) {
  return color_eval(scene.color_phases, x);
}

std::optional<double> first_hit(const AnalyticScene& scene, const Ray& ray) {
  std::optional<double> best;
  for (const auto& s : scene.spheres) {
    const Vec3 oc = ray.origin - s.center;
    const double b = oc.dot(ray.direction);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) continue;
    const double root = std::sqrt(disc);
    double t = -b - root;
    if (t < 0.0) t = -b + root;
    if (t < 0.0) continue;
    // A hit inside another sphere is not on the union surface.
    const Vec3 p = ray.origin + t * ray.direction;
    if (sdf_eval(scene, p) < -1e-9) continue;
    if (!best || t < *best) best = t;
  }
  return best;
}

std::vector<Vec3> sample_surface_points(const AnalyticScene& scene, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("sample_surface_points: count must be >= 1");
  Rng rng = make_rng(seed, stream::kSurface);
  const double half = scene.bounding_radius() + 0.1;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  const std::uint64_t max_attempts = static_cast<std::uint64_t>(count) * 10000ULL;
  std::uint64_t attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > max_attempts) throw NumericalFailure("sample_surface_points: acceptance rate below 1e-4");
    Vec3 x(uniform(rng, -half, half), uniform(rng, -half, half), uniform(rng, -half, half));
    if (std::abs(sdf_eval(scene, x)) >= 0.1) continue;
    bool ok = true;
    for (int it = 0; it < 5; ++it) {
      const double f = sdf_eval(scene, x);
      Vec3 g;
      try {
        g = sdf_gradient(scene, x);
      } catch (const DegenerateConfiguration&) {
        ok = false;
        break;
      }
      x -= f * g / g.squaredNorm();
    }
    if (ok && std::abs(sdf_eval(scene, x)) < 1e-6) out.push_back(x);
  }
  return out;
}

void CameraRig::validate() const {
  const std::size_t n = true_poses.size();
  if (n < 2) throw InvalidArgument("rig: at least two cameras are required");
  if (init_poses.size() != n || outlier_flags.size() != n) {
    throw InvalidArgument("rig: true poses, init poses and outlier flags differ in length");
  }
  intrinsics.validate();
}

CameraRig generate_cameras(const AnalyticScene& scene, int n, double radius, const Intrinsics& k,
                           std::uint64_t seed) {
  if (n < 2) throw InvalidArgument("generate_cameras: n must be >= 2");
  if (!(radius > scene.bounding_radius())) {
    throw InvalidArgument("generate_cameras: radius must exceed the scene extent");
  }
  k.validate();
  Rng rng = make_rng(seed, stream::kCameras);
  const double offset = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  CameraRig rig;
  rig.intrinsics = k;
  rig.radius = radius;
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (i + 0.5) / n;
    const double rho = std::sqrt(1.0 - z * z);
    const double phi = offset + golden * i;
    const Vec3 center = radius * Vec3(rho * std::cos(phi), rho * std::sin(phi), z);
    rig.true_poses.push_back(look_at(center, Vec3::Zero()));
  }
  rig.init_poses = rig.true_poses;
  rig.outlier_flags.assign(static_cast<std::size_t>(n), false);
  return rig;
}

void OutlierSpec::validate() const {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw InvalidArgument("outliers.fraction must be in [0, 1)");
  if (!(rot_deg.first >= 0.0 && rot_deg.first <= rot_deg.second)) {
    throw InvalidArgument("outliers.rot_deg must be an ordered non-negative range");
  }
  if (!(trans.first >= 0.0 && trans.first <= trans.second)) {
    throw InvalidArgument("outliers.trans must be an ordered non-negative range");
  }
  if (!(inlier_rot_deg >= 0.0) || !(inlier_trans >= 0.0)) {
    throw InvalidArgument("outliers: inlier noise must be non-negative");
  }
}

int outlier_count(double fraction, int n) {
  return static_cast<int>(std::ceil(fraction * n - 1e-9));
}

CameraRig inject_outliers(const CameraRig& rig, const OutlierSpec& spec, std::uint64_t seed) {
  spec.validate();
  rig.validate();
  Rng rng = make_rng(seed, stream::kOutliers);
  const int n = rig.size();
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = n - 1; i > 0; --i) {
    std::swap(order[static_cast<std::size_t>(i)], order[uniform_index(rng, static_cast<std::uint64_t>(i) + 1)]);
  }
  CameraRig out = rig;
  out.outlier_flags.assign(static_cast<std::size_t>(n), false);
  const int n_out = outlier_count(spec.fraction, n);
  for (int k = 0; k < n_out; ++k) out.outlier_flags[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = true;

  constexpr double kDeg = std::numbers::pi / 180.0;
  for (int i = 0; i < n; ++i) {
    const bool outlier = out.outlier_flags[static_cast<std::size_t>(i)];
    const double angle = outlier ? uniform(rng, spec.rot_deg.first, spec.rot_deg.second)
                                 : uniform(rng, 0.0, spec.inlier_rot_deg);
    const double shift = outlier ? uniform(rng, spec.trans.first, spec.trans.second)
                                 : uniform(rng, 0.0, spec.inlier_trans);
    const Vec3 axis = random_unit_vector(rng);
    const Vec3 dir = random_unit_vector(rng);
    const PoseMean& truth = rig.true_poses[static_cast<std::size_t>(i)];
    const Mat3 perturbed = axis_angle_to_matrix(axis * angle * kDeg) * truth.rotation_matrix();
    PoseMean& init = out.init_poses[static_cast<std::size_t>(i)];
    init.rotation = matrix_to_axis_angle(perturbed);
    init.translation = truth.translation + shift * dir;
  }
  return out;
}

int MatchTable::row_sum(int i) const {
  int s = 0;
  for (int j = 0; j < n; ++j) s += count(i, j);
  return s;
}

void MatchTable::derive_neighborhoods() {
  neighborhoods.assign(static_cast<std::size_t>(n), {});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (count(i, j) > 0) neighborhoods[static_cast<std::size_t>(i)].push_back(j);
    }
  }
}

namespace {

struct Observation {
  bool valid = false;
  double u = 0.0;
  double v = 0.0;
};

bool in_image(const Intrinsics& k, double u, double v) {
  return u >= 0.0 && u < k.width && v >= 0.0 && v < k.height;
}

// Projection of a surface point with its outward normal; front-facing and
// in-bounds required. With `check_occlusion` the point must also be the first
// surface hit along the viewing ray.
Observation observe(const AnalyticScene& scene, const PoseMean& pose, const Intrinsics& k, const Vec3& p,
                    const Vec3& normal, bool check_occlusion) {
  Observation o;
  const Vec3 to_cam = pose.translation - p;
  if (normal.dot(to_cam) <= 0.0) return o;
  const Vec3 cam = pose.rotation_matrix().transpose() * (p - pose.translation);
  if (cam.z() <= 1e-9) return o;
  o.u = k.fx * cam.x() / cam.z() + k.cx;
  o.v = k.fy * cam.y() / cam.z() + k.cy;
  if (!in_image(k, o.u, o.v)) return o;
  if (check_occlusion) {
    const double dist = to_cam.norm();
    const Ray ray{pose.translation, -to_cam / dist};
    const auto hit = first_hit(scene, ray);
    if (!hit || std::abs(*hit - dist) > 1e-6) return o;
  }
  o.valid = true;
  return o;
}

}  // namespace

MatchTable simulate_matches(const AnalyticScene& scene, const CameraRig& rig, int n_surface_points,
                            double reproj_threshold_px, std::uint64_t seed) {
  if (n_surface_points < 100) throw InvalidArgument("simulate_matches: n_surface_points must be >= 100");
  rig.validate();
  const int n = rig.size();
  double spread = 0.0;
  for (int i = 1; i < n; ++i) {
    spread = std::max(spread, (rig.init_poses[static_cast<std::size_t>(i)].translation - rig.init_poses[0].translation).norm());
  }
  if (spread < 1e-9) throw DegenerateConfiguration("simulate_matches: all cameras coincide");

  const auto points = sample_surface_points(scene, n_surface_points, seed ^ 0x5eedULL);
  MatchTable table;
  table.n = n;
  table.counts.assign(static_cast<std::size_t>(n) * n, 0);
  std::vector<std::vector<Correspondence>> per_pair(static_cast<std::size_t>(n) * n);

  std::vector<Observation> truth(static_cast<std::size_t>(n));
  std::vector<Observation> init(static_cast<std::size_t>(n));
  std::vector<char> ok(static_cast<std::size_t>(n));
  for (const Vec3& p : points) {
    const Vec3 normal = sdf_gradient(scene, p).normalized();
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      truth[ui] = observe(scene, rig.true_poses[ui], rig.intrinsics, p, normal, true);
      init[ui] = observe(scene, rig.init_poses[ui], rig.intrinsics, p, normal, false);
      ok[ui] = 0;
      if (truth[ui].valid && init[ui].valid) {
        const double err = std::hypot(truth[ui].u - init[ui].u, truth[ui].v - init[ui].v);
        ok[ui] = err < reproj_threshold_px;
      }
    }
    for (int i = 0; i < n; ++i) {
      if (!ok[static_cast<std::size_t>(i)]) continue;
      for (int j = i + 1; j < n; ++j) {
        if (!ok[static_cast<std::size_t>(j)]) continue;
        const auto& a = truth[static_cast<std::size_t>(i)];
        const auto& b = truth[static_cast<std::size_t>(j)];
        per_pair[static_cast<std::size_t>(i) * n + j].push_back(
            {static_cast<int>(a.u), static_cast<int>(a.v), static_cast<int>(b.u), static_cast<int>(b.v)});
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      auto& m = per_pair[static_cast<std::size_t>(i) * n + j];
      const int c = static_cast<int>(m.size());
      table.counts[static_cast<std::size_t>(i) * n + j] = c;
      table.counts[static_cast<std::size_t>(j) * n + i] = c;
      if (c > 0) table.pairs.push_back({i, j, std::move(m)});
    }
  }
  table.derive_neighborhoods();
  return table;
}

}  // namespace pcm
