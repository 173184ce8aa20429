#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pcm/geometry.hpp"
#include "pcm/scene.hpp"

namespace pcm {

/// Sampling setup for one ray. Sharpness `s` of the logistic is stored as
/// log(s) because it is learned.
struct RenderParams {
  int n_samples = 64;
  double t_near = 1.5;
  double t_far = 4.5;
  double log_s = std::log(10.0);

  double sharpness() const { return std::exp(log_s); }
  void validate() const;

  /// Interval centered on the rig radius, +-1.5 unit scene radii.
  static RenderParams for_rig(double rig_radius, int n_samples, double sharpness);
};

struct RayRenderResult {
  Vec3 color = Vec3::Zero();
  std::vector<double> depths;  // interval midpoints along the ray
  std::vector<Vec3> points;
  std::vector<double> weights;
  std::vector<double> transmittance;
  double accumulated_weight = 0.0;
};

/// Logistic density s e^{-sx} / (1 + e^{-sx})^2, an even function of x.
double s_density(double x, double s);

/// Opacity of each interval between consecutive SDF samples (NeuS unbiased
/// discretization): max((Phi(f_i) - Phi(f_{i+1})) / Phi(f_i), 0).
std::vector<double> discrete_alphas(std::span<const double> sdf_values, double s);

struct CompositeResult {
  Vec3 color = Vec3::Zero();
  std::vector<double> weights;
  std::vector<double> transmittance;
  double accumulated_weight = 0.0;
};

/// Front-to-back alpha compositing over a black background.
CompositeResult composite(std::span<const double> alphas, std::span<const Vec3> colors);

/// Renders one pixel. `jitter` holds one offset in [0, 1) per interval for
/// stratified training samples; empty means deterministic midpoints.
RayRenderResult render_ray(const AnalyticScene& scene, const PoseMean& pose, const Intrinsics& k,
                           PixelCoord pixel, const RenderParams& params, std::span<const double> jitter = {});

/// Mean absolute error over every channel of every ray.
double photometric_loss(std::span<const Vec3> rendered, std::span<const Vec3> target);

/// Mean of (|grad f| - 1)^2 over the points.
double eikonal_loss(const AnalyticScene& scene, std::span<const Vec3> points);

/// Gradient with respect to every learnable of the model except the
/// log-variances: camera mean poses (r then t, 6 per camera), learnable
/// sphere parameters (center then radius, 4 per learnable sphere, in scene
/// order) and log-sharpness.
struct ModelGradient {
  std::vector<double> pose;
  std::vector<double> scene;
  double log_s = 0.0;

  static ModelGradient zeros(int n_cameras, int n_learnable_spheres);
  ModelGradient& operator+=(const ModelGradient& o);
  ModelGradient& operator*=(double f);
  /// Throws NumericalFailure naming the first non-finite entry.
  void check_finite(const char* what) const;
  double max_abs() const;
};

struct RaySpec {
  int camera = 0;
  PixelCoord pixel;
  Vec3 target = Vec3::Zero();
  std::vector<double> jitter;
};

struct PhotometricEvaluation {
  double loss = 0.0;
  ModelGradient grad;
  std::vector<Vec3> colors;
};

/// Photometric L1 loss over a ray batch and its exact gradient through ray
/// generation, sampling, the SDF, the color field and compositing.
PhotometricEvaluation pose_gradient(const AnalyticScene& scene, std::span<const PoseMean> means,
                                    const Intrinsics& k, std::span<const RaySpec> rays,
                                    const RenderParams& params);

struct EikonalEvaluation {
  double loss = 0.0;
  ModelGradient grad;
};

EikonalEvaluation eikonal_gradient(const AnalyticScene& scene, int n_cameras, std::span<const Vec3> points);

// ---------------------------------------------------------------------------
// Kernels shared by the double and dual-number paths.

template <typename T>
struct RayTrace {
  Vec3T<T> color;
  std::vector<double> depths;
  std::vector<Vec3T<T>> points;
  std::vector<T> weights;
  std::vector<T> transmittance;
  T accumulated;
};

/// log Phi_s(f) where Phi_s is the logistic CDF with sharpness s.
template <typename T>
T log_cdf(const T& f, const T& s) {
  return -softplus<T>(-(s * f));
}

template <typename T>
T interval_alpha(const T& f_front, const T& f_back, const T& s) {
  const T a = -expm1_t(log_cdf(f_back, s) - log_cdf(f_front, s));
  if (value_of(a) <= 0.0) return T(0.0);
  return a;
}

template <typename T>
RayTrace<T> trace_ray(const std::vector<SphereT<T>>& spheres, double field_scale,
                      const std::array<double, 3>& phases, const Vec3T<T>& origin, const Vec3T<T>& dir,
                      const RenderParams& params, const T& s, std::span<const double> jitter) {
  const int n = params.n_samples;
  const double delta = (params.t_far - params.t_near) / n;
  RayTrace<T> out;
  out.depths.resize(static_cast<std::size_t>(n));
  out.points.resize(static_cast<std::size_t>(n));
  out.weights.resize(static_cast<std::size_t>(n));
  out.transmittance.resize(static_cast<std::size_t>(n));
  out.color = Vec3T<T>::Zero();

  std::vector<T> alphas(static_cast<std::size_t>(n));
  if (jitter.empty()) {
    // Shared boundaries between consecutive intervals.
    T f_prev = sdf_value<T>(spheres, field_scale, origin + T(params.t_near) * dir);
    for (int i = 0; i < n; ++i) {
      const double b = params.t_near + (i + 1) * delta;
      const T f_next = sdf_value<T>(spheres, field_scale, origin + T(b) * dir);
      alphas[static_cast<std::size_t>(i)] = interval_alpha(f_prev, f_next, s);
      out.depths[static_cast<std::size_t>(i)] = params.t_near + (i + 0.5) * delta;
      f_prev = f_next;
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const double mid = params.t_near + (i + jitter[static_cast<std::size_t>(i)]) * delta;
      const T fa = sdf_value<T>(spheres, field_scale, origin + T(mid - 0.5 * delta) * dir);
      const T fb = sdf_value<T>(spheres, field_scale, origin + T(mid + 0.5 * delta) * dir);
      alphas[static_cast<std::size_t>(i)] = interval_alpha(fa, fb, s);
      out.depths[static_cast<std::size_t>(i)] = mid;
    }
  }

  T trans(1.0);
  for (int i = 0; i < n; ++i) {
    const auto u = static_cast<std::size_t>(i);
    out.points[u] = origin + T(out.depths[u]) * dir;
    out.transmittance[u] = trans;
    out.weights[u] = trans * alphas[u];
    if (value_of(out.weights[u]) > 0.0) out.color += out.weights[u] * color_value<T>(phases, out.points[u]);
    trans = trans * (T(1.0) - alphas[u]);
  }
  out.accumulated = T(1.0) - trans;
  return out;
}

}  // namespace pcm
