#include "pcm/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "autodiff.hpp"
#include "pcm/error.hpp"
#include "pcm/parallel.hpp"

namespace pcm {

void RenderParams::validate() const {
  if (n_samples < 2) throw InvalidArgument("render: n_samples must be >= 2");
  if (!(t_near > 0.0 && t_near < t_far)) throw InvalidArgument("render: need 0 < t_near < t_far");
  if (!std::isfinite(log_s)) throw InvalidArgument("render: sharpness must be positive and finite");
}

RenderParams RenderParams::for_rig(double rig_radius, int n_samples, double sharpness) {
  RenderParams p;
  p.n_samples = n_samples;
  p.t_near = rig_radius - 1.5;
  p.t_far = rig_radius + 1.5;
  p.log_s = std::log(sharpness);
  return p;
}

double s_density(double x, double s) {
  // sig(y)(1 - sig(y)) written with e^{-|y|} so both tails keep precision.
  const double e = std::exp(-std::abs(s * x));
  return s * e / ((1.0 + e) * (1.0 + e));
}

std::vector<double> discrete_alphas(std::span<const double> sdf_values, double s) {
  if (sdf_values.size() < 2) throw InvalidArgument("discrete_alphas: need at least two samples");
  std::vector<double> out(sdf_values.size() - 1);
  for (std::size_t i = 0; i + 1 < sdf_values.size(); ++i) out[i] = interval_alpha(sdf_values[i], sdf_values[i + 1], s);
  return out;
}

CompositeResult composite(std::span<const double> alphas, std::span<const Vec3> colors) {
  if (alphas.size() != colors.size()) throw InvalidArgument("composite: alphas and colors differ in length");
  CompositeResult out;
  out.weights.resize(alphas.size());
  out.transmittance.resize(alphas.size());
  double trans = 1.0;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    out.transmittance[i] = trans;
    out.weights[i] = trans * alphas[i];
    out.color += out.weights[i] * colors[i];
    out.accumulated_weight += out.weights[i];
    trans *= 1.0 - alphas[i];
  }
  return out;
}

namespace {

std::vector<SphereT<double>> plain_spheres(const AnalyticScene& scene) {
  std::vector<SphereT<double>> out;
  for (const auto& s : scene.spheres) out.push_back({s.center, s.radius});
  return out;
}

void check_pixel(const Intrinsics& k, PixelCoord p) {
  if (!(p.u >= 0.0 && p.u < k.width && p.v >= 0.0 && p.v < k.height)) {
    throw InvalidArgument("render: pixel (" + std::to_string(p.u) + ", " + std::to_string(p.v) + ") outside the image");
  }
}

void check_jitter(const RenderParams& params, std::span<const double> jitter) {
  if (!jitter.empty() && jitter.size() != static_cast<std::size_t>(params.n_samples)) {
    throw InvalidArgument("render: jitter needs one offset per interval");
  }
}

}  // namespace

RayRenderResult render_ray(const AnalyticScene& scene, const PoseMean& pose, const Intrinsics& k,
                           PixelCoord pixel, const RenderParams& params, std::span<const double> jitter) {
  check_pixel(k, pixel);
  check_jitter(params, jitter);
  const Ray ray = generate_ray(pose, k, pixel);
  const auto trace = trace_ray<double>(plain_spheres(scene), scene.field_scale, scene.color_phases, ray.origin,
                                       ray.direction, params, params.sharpness(), jitter);
  RayRenderResult out;
  out.color = trace.color;
  out.depths = trace.depths;
  out.points = trace.points;
  out.weights = trace.weights;
  out.transmittance = trace.transmittance;
  out.accumulated_weight = compensated_sum(out.weights);
  return out;
}

double photometric_loss(std::span<const Vec3> rendered, std::span<const Vec3> target) {
  if (rendered.size() != target.size()) throw InvalidArgument("photometric_loss: batch sizes differ");
  if (rendered.empty()) return 0.0;
  CompensatedSum s;
  for (std::size_t i = 0; i < rendered.size(); ++i) s.add((rendered[i] - target[i]).cwiseAbs().sum());
  return s.value() / (3.0 * static_cast<double>(rendered.size()));
}

double eikonal_loss(const AnalyticScene& scene, std::span<const Vec3> points) {
  if (points.empty()) return 0.0;
  CompensatedSum s;
  for (const Vec3& p : points) {
    const double d = sdf_gradient(scene, p).norm() - 1.0;
    s.add(d * d);
  }
  return s.value() / static_cast<double>(points.size());
}

ModelGradient ModelGradient::zeros(int n_cameras, int n_learnable_spheres) {
  ModelGradient g;
  g.pose.assign(static_cast<std::size_t>(6 * n_cameras), 0.0);
  g.scene.assign(static_cast<std::size_t>(4 * n_learnable_spheres), 0.0);
  return g;
}

ModelGradient& ModelGradient::operator+=(const ModelGradient& o) {
  for (std::size_t i = 0; i < pose.size(); ++i) pose[i] += o.pose[i];
  for (std::size_t i = 0; i < scene.size(); ++i) scene[i] += o.scene[i];
  log_s += o.log_s;
  return *this;
}

ModelGradient& ModelGradient::operator*=(double f) {
  for (double& v : pose) v *= f;
  for (double& v : scene) v *= f;
  log_s *= f;
  return *this;
}

void ModelGradient::check_finite(const char* what) const {
  static const char* kPoseNames[] = {"r.x", "r.y", "r.z", "t.x", "t.y", "t.z"};
  static const char* kSceneNames[] = {"center.x", "center.y", "center.z", "radius"};
  for (std::size_t i = 0; i < pose.size(); ++i) {
    if (!std::isfinite(pose[i])) {
      throw NumericalFailure(std::string(what) + ": non-finite gradient for camera " + std::to_string(i / 6) + " " +
                             kPoseNames[i % 6]);
    }
  }
  for (std::size_t i = 0; i < scene.size(); ++i) {
    if (!std::isfinite(scene[i])) {
      throw NumericalFailure(std::string(what) + ": non-finite gradient for learnable sphere " +
                             std::to_string(i / 4) + " " + kSceneNames[i % 4]);
    }
  }
  if (!std::isfinite(log_s)) throw NumericalFailure(std::string(what) + ": non-finite gradient for log sharpness");
}

double ModelGradient::max_abs() const {
  double m = std::abs(log_s);
  for (double v : pose) m = std::max(m, std::abs(v));
  for (double v : scene) m = std::max(m, std::abs(v));
  return m;
}

namespace {

struct LocalResult {
  double value = 0.0;
  Vec3 color = Vec3::Zero();
  std::vector<double> grad;
};

}  // namespace

PhotometricEvaluation pose_gradient(const AnalyticScene& scene, std::span<const PoseMean> means,
                                    const Intrinsics& k, std::span<const RaySpec> rays,
                                    const RenderParams& params) {
  params.validate();
  const int n_cam = static_cast<int>(means.size());
  const detail::LocalLayout layout{1, scene.learnable_count()};
  PhotometricEvaluation out;
  out.grad = ModelGradient::zeros(n_cam, layout.learnable_spheres);
  if (rays.empty()) return out;
  for (const auto& r : rays) {
    if (r.camera < 0 || r.camera >= n_cam) throw InvalidArgument("pose_gradient: ray camera index out of range");
    const PoseMean& m = means[static_cast<std::size_t>(r.camera)];
    if (!m.rotation.allFinite() || !m.translation.allFinite()) {
      throw NumericalFailure("photometric loss: non-finite pose for camera " + std::to_string(r.camera));
    }
    check_pixel(k, r.pixel);
    check_jitter(params, r.jitter);
  }

  std::vector<LocalResult> local(rays.size());
  detail::with_jet_size(layout.size(), [&]<int N>() {
    using J = detail::Jet<N>;
    const auto spheres = detail::jet_spheres<N>(scene, layout);
    const J s = exp(detail::seeded<N>(params.log_s, layout.log_s_slot()));
    parallel_for(rays.size(), [&](std::size_t i) {
      const RaySpec& ray = rays[i];
      Vec3T<J> r;
      Vec3T<J> t;
      detail::jet_pose<N>(means[static_cast<std::size_t>(ray.camera)], 0, r, t);
      const Vec3T<J> dir = ray_direction<J>(rodrigues<J>(r), k, ray.pixel.u, ray.pixel.v);
      const auto trace = trace_ray<J>(spheres, scene.field_scale, scene.color_phases, t, dir, params, s, ray.jitter);
      J err(0.0);
      for (int a = 0; a < 3; ++a) err += abs(trace.color[a] - J(ray.target[a]));
      local[i].value = err.a;
      for (int a = 0; a < 3; ++a) local[i].color[a] = trace.color[a].a;
      local[i].grad = detail::derivatives<N>(err, layout.size());
    });
    return 0;
  });

  const double scale = 1.0 / (3.0 * static_cast<double>(rays.size()));
  CompensatedSum total;
  out.colors.reserve(rays.size());
  for (std::size_t i = 0; i < rays.size(); ++i) {
    if (!std::isfinite(local[i].value) || !local[i].color.allFinite()) {
      throw NumericalFailure("photometric loss: non-finite render for a ray of camera " +
                             std::to_string(rays[i].camera));
    }
    total.add(local[i].value);
    const int cam = rays[i].camera;
    detail::scatter(local[i].grad, layout, std::span<const int>(&cam, 1), scale, out.grad);
    out.colors.push_back(local[i].color);
  }
  out.loss = total.value() * scale;
  out.grad.check_finite("photometric loss");
  return out;
}

EikonalEvaluation eikonal_gradient(const AnalyticScene& scene, int n_cameras, std::span<const Vec3> points) {
  const detail::LocalLayout layout{0, scene.learnable_count()};
  EikonalEvaluation out;
  out.grad = ModelGradient::zeros(n_cameras, layout.learnable_spheres);
  if (points.empty()) return out;
  std::vector<LocalResult> local(points.size());
  detail::with_jet_size(layout.size(), [&]<int N>() {
    using J = detail::Jet<N>;
    const auto spheres = detail::jet_spheres<N>(scene, layout);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const Vec3T<J> x = points[i].cast<J>();
      std::size_t best = 0;
      double best_d = 0.0;
      for (std::size_t p = 0; p < spheres.size(); ++p) {
        const double d = (points[i] - scene.spheres[p].center).norm() - scene.spheres[p].radius;
        if (p == 0 || d < best_d) {
          best_d = d;
          best = p;
        }
      }
      const Vec3T<J> diff = x - spheres[best].center;
      const J norm = diff.norm();
      if (norm.a < 1e-12) throw DegenerateConfiguration("eikonal: sample at a primitive center");
      const Vec3T<J> grad = J(scene.field_scale) * diff / norm;
      const J dev = grad.norm() - J(1.0);
      const J sq = dev * dev;
      local[i].value = sq.a;
      local[i].grad = detail::derivatives<N>(sq, layout.size());
    }
    return 0;
  });
  const double scale = 1.0 / static_cast<double>(points.size());
  CompensatedSum total;
  for (const auto& l : local) {
    total.add(l.value);
    detail::scatter(l.grad, layout, {}, scale, out.grad);
  }
  out.loss = total.value() * scale;
  out.grad.check_finite("eikonal loss");
  return out;
}

GroundTruthImages render_gt_images(const AnalyticScene& scene, const CameraRig& rig, const RenderParams& params) {
  rig.validate();
  params.validate();
  const Intrinsics& k = rig.intrinsics;
  GroundTruthImages out;
  for (const PoseMean& pose : rig.true_poses) {
    Image img;
    img.width = k.width;
    img.height = k.height;
    img.rgb.assign(static_cast<std::size_t>(3 * k.width * k.height), 0.0f);
    parallel_for(static_cast<std::size_t>(k.height), [&](std::size_t row) {
      for (int col = 0; col < k.width; ++col) {
        const auto res = render_ray(scene, pose, k, pixel_center(col, static_cast<int>(row)), params);
        const std::size_t o = 3 * (row * static_cast<std::size_t>(k.width) + static_cast<std::size_t>(col));
        for (int a = 0; a < 3; ++a) {
          img.rgb[o + static_cast<std::size_t>(a)] = static_cast<float>(std::clamp(res.color[a], 0.0, 1.0));
        }
      }
    });
    out.images.push_back(std::move(img));
  }
  return out;
}

}  // namespace pcm
