#include "pcm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "pcm/error.hpp"
#include "pcm/random.hpp"

namespace pcm {

void TrainConfig::validate() const {
  const auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw InvalidArgument(msg);
  };
  need(total_iters >= 0, "train.total_iters must be >= 0");
  need(batch_rays >= 1, "train.batch_rays must be >= 1");
  need(lambda_eik >= 0.0, "train.lambda_eik must be >= 0");
  need(lambda_iou >= 0.0, "train.lambda_iou must be >= 0");
  need(lambda_unc >= 0.0, "train.lambda_unc must be >= 0");
  need(kappa >= 0.0, "train.kappa must be >= 0");
  need(t_warm >= 0, "train.t_warm must be >= 0");
  need(t_ramp >= 1, "train.t_ramp must be >= 1");
  need(t_warm + t_ramp <= total_iters || total_iters == 0, "train.t_warm + train.t_ramp must not exceed train.total_iters");
  need(eta0_pose > 0.0, "train.eta0_pose must be > 0");
  need(eta_logvar > 0.0, "train.eta_logvar must be > 0");
  need(eta_net > 0.0, "train.eta_net must be > 0");
  need(lr_floor > 0.0 && lr_floor <= 1.0, "train.lr_floor must be in (0, 1]");
  need(confidence_update_every >= 1, "train.confidence_update_every must be >= 1");
  need(confidence_alpha >= 0.0 && confidence_alpha <= 1.0, "train.confidence_alpha must be in [0, 1]");
  need(buffer_capacity >= 1, "train.buffer_capacity must be >= 1");
  need(n_match >= 1, "train.n_match must be >= 1");
  need(batch_rays >= n_match, "train.batch_rays must be >= train.n_match");
  need(top_k >= 1, "train.top_k must be >= 1");
  need(top_k <= n_samples, "train.top_k must not exceed train.n_samples");
  need(grid_resolution >= 2, "train.grid_resolution must be >= 2");
  need(kernel_sigma >= 0.0, "train.kernel_sigma must be >= 0");
  need(base_variance > 0.0, "train.base_variance must be > 0");
  need(pair_steps >= 0 && balance_steps >= 1, "train.pair_steps must be >= 0 and train.balance_steps >= 1");
  need(eikonal_points >= 0, "train.eikonal_points must be >= 0");
  need(n_samples >= 2, "train.n_samples must be >= 2");
  need(init_sharpness > 0.0, "train.init_sharpness must be > 0");
  need(checkpoint_every >= 0, "train.checkpoint_every must be >= 0");
  need(log_every >= 1, "train.log_every must be >= 1");
  need(blur.init_fraction > 0.0, "train.blur.init_fraction must be > 0");
  need(blur.plateau_factor > 0.0 && blur.plateau_factor <= 1.0, "train.blur.plateau_factor must be in (0, 1]");
  need(blur.patience >= 1, "train.blur.patience must be >= 1");
  need(blur.window >= 0, "train.blur.window must be >= 0");
}

double unc_weight(long t, const TrainConfig& config) {
  if (t < config.t_warm) return 0.0;
  const double ramp = static_cast<double>(t - config.t_warm) / static_cast<double>(config.t_ramp);
  return config.lambda_unc * std::min(1.0, ramp);
}

LossBreakdown total_loss(const LossComponents& c, long t, const TrainConfig& config) {
  const std::pair<const char*, double> parts[] = {
      {"color", c.color}, {"eikonal", c.eikonal}, {"iou", c.iou}, {"uncertainty", c.unc}};
  for (const auto& [name, v] : parts) {
    if (!std::isfinite(v)) throw NumericalFailure(std::string("total_loss: non-finite ") + name + " component");
  }
  LossBreakdown b;
  b.color = c.color;
  b.eikonal = config.lambda_eik * c.eikonal;
  b.iou = config.lambda_iou * c.iou;
  b.unc = unc_weight(t, config) * c.unc;
  b.total = b.color + b.eikonal + b.iou + b.unc;
  return b;
}

void damp_pose_gradients(const ProbabilisticPoseBank& bank, std::span<double> pose_grads, double kappa, long t,
                         long t_warm) {
  if (t < t_warm) return;
  if (pose_grads.size() != static_cast<std::size_t>(6 * bank.size())) {
    throw InvalidArgument("damp_pose_gradients: gradient length does not match the bank");
  }
  for (int i = 0; i < bank.size(); ++i) {
    const double f = damping_factor(uncertainty_magnitude(bank, i), kappa);
    for (int a = 0; a < 6; ++a) pose_grads[static_cast<std::size_t>(6 * i + a)] *= f;
  }
}

BlurState blur_init(int height, int width, const BlurConfig& config) {
  BlurState s;
  s.sigma = config.enabled ? std::max(height, width) * config.init_fraction : 0.0;
  return s;
}

double blur_schedule(BlurState& state, double window_loss, const BlurConfig& config) {
  if (!config.enabled) {
    state.sigma = 0.0;
    return 0.0;
  }
  if (!state.started || window_loss < state.best) {
    state.best = window_loss;
    state.stalls = 0;
    state.started = true;
  } else {
    ++state.stalls;
  }
  if (state.stalls >= config.patience) {
    state.sigma *= config.plateau_factor;
    state.stalls = 0;
  } else {
    state.sigma = 0.5 * state.sigma + 0.5 * window_loss * 20.0;
  }
  return state.sigma;
}

Image gaussian_blur(const Image& image, double sigma) {
  if (!(sigma > 0.0)) return image;
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double norm = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[static_cast<std::size_t>(i + radius)] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += kernel[static_cast<std::size_t>(i + radius)];
  }
  for (double& k : kernel) k /= norm;
  const int w = image.width;
  const int h = image.height;
  std::vector<double> tmp(image.rgb.size(), 0.0);
  const auto idx = [w](int col, int row, int c) { return 3 * (static_cast<std::size_t>(row) * w + col) + c; };
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int x = std::clamp(col + i, 0, w - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * image.rgb[idx(x, row, c)];
        }
        tmp[idx(col, row, c)] = acc;
      }
    }
  }
  Image out = image;
  for (int row = 0; row < h; ++row) {
    for (int col = 0; col < w; ++col) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          const int y = std::clamp(row + i, 0, h - 1);
          acc += kernel[static_cast<std::size_t>(i + radius)] * tmp[idx(col, y, c)];
        }
        out.rgb[idx(col, row, c)] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

namespace {

void check_inputs(const TrainInputs& in) {
  in.scene.validate();
  in.rig.validate();
  const int n = in.rig.size();
  if (in.matches.n != n || in.matches.counts.size() != static_cast<std::size_t>(n) * n) {
    throw InvalidArgument("train: match table does not match the rig");
  }
  if (static_cast<int>(in.images.images.size()) != n) throw InvalidArgument("train: one image per camera is required");
  for (const auto& img : in.images.images) {
    if (img.width != in.rig.intrinsics.width || img.height != in.rig.intrinsics.height) {
      throw InvalidArgument("train: image size differs from the intrinsics");
    }
  }
}

std::vector<double> pack_poses(const ProbabilisticPoseBank& bank) {
  std::vector<double> x;
  for (const auto& m : bank.means) {
    for (int a = 0; a < 3; ++a) x.push_back(m.rotation[a]);
    for (int a = 0; a < 3; ++a) x.push_back(m.translation[a]);
  }
  return x;
}

void unpack_poses(const std::vector<double>& x, ProbabilisticPoseBank& bank) {
  for (std::size_t i = 0; i < bank.means.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      bank.means[i].rotation[a] = x[6 * i + static_cast<std::size_t>(a)];
      bank.means[i].translation[a] = x[6 * i + 3 + static_cast<std::size_t>(a)];
    }
  }
}

std::vector<double> pack_logvar(const ProbabilisticPoseBank& bank) {
  std::vector<double> x;
  for (std::size_t i = 0; i < bank.means.size(); ++i) {
    for (int a = 0; a < 3; ++a) x.push_back(bank.log_var_rot[i][a]);
    for (int a = 0; a < 3; ++a) x.push_back(bank.log_var_trans[i][a]);
  }
  return x;
}

void unpack_logvar(const std::vector<double>& x, ProbabilisticPoseBank& bank) {
  for (std::size_t i = 0; i < bank.means.size(); ++i) {
    for (int a = 0; a < 3; ++a) {
      bank.log_var_rot[i][a] = x[6 * i + static_cast<std::size_t>(a)];
      bank.log_var_trans[i][a] = x[6 * i + 3 + static_cast<std::size_t>(a)];
    }
  }
}

std::vector<double> pack_net(const AnalyticScene& scene, double log_s) {
  std::vector<double> x;
  for (const auto& s : scene.spheres) {
    if (!s.learnable) continue;
    for (int a = 0; a < 3; ++a) x.push_back(s.center[a]);
    x.push_back(s.radius);
  }
  x.push_back(log_s);
  return x;
}

void unpack_net(const std::vector<double>& x, AnalyticScene& scene, double& log_s) {
  std::size_t o = 0;
  for (auto& s : scene.spheres) {
    if (!s.learnable) continue;
    for (int a = 0; a < 3; ++a) s.center[a] = x[o++];
    s.radius = x[o++];
  }
  log_s = x[o];
}

/// Index drawn in proportion to non-negative weights; uniform if all are zero.
std::size_t draw_weighted(Rng& rng, std::span<const double> w) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  if (!(total > 0.0)) return static_cast<std::size_t>(uniform_index(rng, w.size()));
  double u = uniform(rng, 0.0, total);
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  return w.size() - 1;
}

double batch_mse(std::span<const Vec3> a, std::span<const Vec3> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]).squaredNorm();
  return s / (3.0 * static_cast<double>(a.size()));
}

std::vector<double> draw_jitter(Rng& rng, int n) {
  std::vector<double> j(static_cast<std::size_t>(n));
  for (double& v : j) v = uniform(rng);
  return j;
}

}  // namespace

TrainState init_state(const TrainInputs& inputs, const TrainConfig& config) {
  config.validate();
  check_inputs(inputs);
  const int n = inputs.rig.size();
  std::vector<double> gamma0;
  if (config.confidence_grounding) {
    gamma0 = normalize_confidence(static_reliability(inputs.matches));
  } else {
    gamma0.assign(static_cast<std::size_t>(n), 0.5);
  }
  // The floor keeps inverse-confidence initialization finite.
  for (double& g : gamma0) g = std::max(g, kConfidenceFloor);
  TrainState s;
  s.bank = make_bank(inputs.rig.init_poses, gamma0, config.base_variance);
  s.scene = inputs.scene;
  s.log_s = std::log(config.init_sharpness);
  const int capacity = config.buffer_pair_epoch ? pair_epoch_buffer_capacity(inputs.matches) : config.buffer_capacity;
  s.tracker = ConfidenceTracker(gamma0, config.confidence_alpha, capacity);
  s.pose_opt = OptimizerState::for_size(static_cast<std::size_t>(6 * n));
  s.logvar_opt = OptimizerState::for_size(static_cast<std::size_t>(6 * n));
  s.net_opt = OptimizerState::for_size(static_cast<std::size_t>(4 * s.scene.learnable_count() + 1));
  s.blur_sigma = blur_init(inputs.rig.intrinsics.height, inputs.rig.intrinsics.width, config.blur).sigma;
  return s;
}

namespace {

void log_cameras(const TrainState& s, const TrainInputs& in, const TrainConfig& config, RunReport& report) {
  const auto summary = summarize(s.bank, config.kappa);
  for (int i = 0; i < s.bank.size(); ++i) {
    const auto u = static_cast<std::size_t>(i);
    CameraRow row;
    row.iteration = s.iteration;
    row.camera = i;
    row.gamma0 = s.tracker.gamma0()[u];
    row.gamma_hat = s.tracker.gamma_hat()[u];
    row.gamma = s.tracker.gamma()[u];
    row.sigma_bar = summary.sigma_bar[u];
    row.damping = summary.damping[u];
    row.rot_err_deg =
        rotation_angle_deg(s.bank.means[u].rotation_matrix(), in.rig.true_poses[u].rotation_matrix());
    row.trans_err = (s.bank.means[u].translation - in.rig.true_poses[u].translation).norm();
    report.cameras.push_back(row);
  }
}

}  // namespace

TrainResult train(const TrainInputs& inputs, const TrainConfig& config, const FailureHook& on_failure) {
  TrainResult result;
  result.state = init_state(inputs, config);
  TrainState& s = result.state;
  const int n = inputs.rig.size();
  const Intrinsics& k = inputs.rig.intrinsics;
  Rng rng = make_rng(config.seed, stream::kTrain);

  RenderParams render = RenderParams::for_rig(inputs.rig.radius, config.n_samples, config.init_sharpness);
  VdaParams vda{config.top_k, config.grid_resolution, config.effective_sigma(), config.n_match};

  std::vector<double> pair_weights;
  for (const auto& p : inputs.matches.pairs) pair_weights.push_back(static_cast<double>(p.matches.size()));
  const bool have_pairs = !inputs.matches.pairs.empty();

  BlurState blur = blur_init(k.height, k.width, config.blur);
  const long blur_window =
      config.blur.window > 0 ? config.blur.window : std::max<long>(1, config.total_iters * 50000 / 150000);
  GroundTruthImages blurred = inputs.images;
  double blurred_sigma = -1.0;
  double window_loss = 0.0;
  long window_count = 0;

  log_cameras(s, inputs, config, result.report);

  const int cycle = config.pair_steps + config.balance_steps;
  for (long t = 0; t < config.total_iters; ++t) {
    s.iteration = t;
    try {
      render.log_s = s.log_s;
      LossRow row;
      row.iteration = t;
      ModelGradient grad;
      LossComponents comp;
      const bool pair_pass = have_pairs && (t % cycle) < config.pair_steps;

      if (pair_pass) {
        const auto& pm = inputs.matches.pairs[draw_weighted(rng, pair_weights)];
        const auto chosen = sample_matches(pm.matches, config.n_match, rng);
        std::vector<MatchedRay> rays;
        for (const auto& c : chosen) {
          MatchedRay r;
          r.match = c;
          r.target_i = inputs.images.images[static_cast<std::size_t>(pm.i)].at(c.col_i, c.row_i);
          r.target_j = inputs.images.images[static_cast<std::size_t>(pm.j)].at(c.col_j, c.row_j);
          r.jitter_i = draw_jitter(rng, config.n_samples);
          r.jitter_j = draw_jitter(rng, config.n_samples);
          rays.push_back(std::move(r));
        }
        const auto ev = vda_pair_loss(s.scene, s.bank.means, k, pm.i, pm.j, rays, render, vda);
        comp.color = ev.color;
        comp.iou = ev.iou;
        grad = ev.color_grad;
        ModelGradient iou = ev.iou_grad;
        iou *= config.lambda_iou;
        grad += iou;
        std::vector<Vec3> ti, tj;
        for (const auto& r : rays) {
          ti.push_back(r.target_i);
          tj.push_back(r.target_j);
        }
        s.tracker.record_psnr(pm.i, batch_mse(ev.colors_i, ti));
        s.tracker.record_psnr(pm.j, batch_mse(ev.colors_j, tj));
        row.phase = 'p';
        row.cam_a = pm.i;
        row.cam_b = pm.j;
        row.vda_skipped = ev.skipped;
      } else {
        if (blurred_sigma != blur.sigma) {
          for (std::size_t i = 0; i < blurred.images.size(); ++i) {
            blurred.images[i] = gaussian_blur(inputs.images.images[i], blur.sigma);
          }
          blurred_sigma = blur.sigma;
        }
        std::vector<double> weights(static_cast<std::size_t>(n), 1.0);
        if (config.adaptive_sampling) weights = s.tracker.gamma();
        const int cam = static_cast<int>(draw_weighted(rng, weights));
        std::vector<RaySpec> rays;
        for (int r = 0; r < config.batch_rays; ++r) {
          RaySpec spec;
          spec.camera = cam;
          const int col = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k.width)));
          const int rw = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(k.height)));
          spec.pixel = pixel_center(col, rw);
          spec.target = blurred.images[static_cast<std::size_t>(cam)].at(col, rw);
          spec.jitter = draw_jitter(rng, config.n_samples);
          rays.push_back(std::move(spec));
        }
        const auto ev = pose_gradient(s.scene, s.bank.means, k, rays, render);
        comp.color = ev.loss;
        grad = ev.grad;
        std::vector<Vec3> pts;
        for (int i = 0; i < config.eikonal_points; ++i) {
          pts.emplace_back(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
        }
        const auto eik = eikonal_gradient(s.scene, n, pts);
        comp.eikonal = eik.loss;
        ModelGradient e = eik.grad;
        e *= config.lambda_eik;
        grad += e;
        std::vector<Vec3> targets;
        for (const auto& r : rays) targets.push_back(r.target);
        s.tracker.record_psnr(cam, batch_mse(ev.colors, targets));
        row.phase = 'b';
        row.cam_a = cam;
      }

      // Uncertainty term: its gradient reaches the log-variances only.
      const auto& gamma = s.tracker.gamma();
      comp.unc = uncertainty_loss(s.bank, gamma);
      const double w_unc = unc_weight(t, config);
      const LossBreakdown total = total_loss(comp, t, config);
      grad.check_finite("total loss");

      const auto unc_grad = analytic_unc_gradient(s.bank, gamma);
      std::vector<double> logvar_grad;
      for (int i = 0; i < n; ++i) {
        for (int a = 0; a < 3; ++a) logvar_grad.push_back(w_unc * unc_grad.rot[static_cast<std::size_t>(i)][a]);
        for (int a = 0; a < 3; ++a) logvar_grad.push_back(w_unc * unc_grad.trans[static_cast<std::size_t>(i)][a]);
      }

      // Post-backward, pre-step: per-camera damping of the mean-pose gradients.
      damp_pose_gradients(s.bank, grad.pose, config.kappa, t, config.t_warm);

      const double lr_pose = lr_schedule(t, config.total_iters, config.eta0_pose, config.lr_schedule, config.lr_floor);
      const double lr_var = lr_schedule(t, config.total_iters, config.eta_logvar, config.lr_schedule, config.lr_floor);
      const double lr_net = lr_schedule(t, config.total_iters, config.eta_net, config.lr_schedule, config.lr_floor);

      std::vector<double> poses = pack_poses(s.bank);
      if (config.optimize_poses) optimizer_step(s.pose_opt, poses, grad.pose, lr_pose, "pose");
      std::vector<double> logvar = pack_logvar(s.bank);
      optimizer_step(s.logvar_opt, logvar, logvar_grad, lr_var, "log-variance");
      std::vector<double> net = pack_net(s.scene, s.log_s);
      std::vector<double> net_grad = grad.scene;
      net_grad.push_back(grad.log_s);
      optimizer_step(s.net_opt, net, net_grad, lr_net, "scene");

      unpack_poses(poses, s.bank);
      unpack_logvar(logvar, s.bank);
      AnalyticScene next_scene = s.scene;
      unpack_net(net, next_scene, s.log_s);
      for (const auto& sp : next_scene.spheres) {
        if (!(sp.radius > 0.0)) throw NumericalFailure("train: a sphere radius became non-positive");
      }
      s.scene = std::move(next_scene);

      if ((t + 1) % config.confidence_update_every == 0) s.tracker.update_dynamic();

      if (config.blur.enabled) {
        window_loss += total.total;
        if (++window_count == blur_window) {
          blur_schedule(blur, window_loss / static_cast<double>(window_count), config.blur);
          window_loss = 0.0;
          window_count = 0;
        }
      }
      s.blur_sigma = blur.sigma;

      row.lr_pose = lr_pose;
      row.w_unc = w_unc;
      row.raw = comp;
      row.weighted = total;
      row.sharpness = std::exp(s.log_s);
      row.blur_sigma = blur.sigma;
      result.report.losses.push_back(row);

      s.iteration = t + 1;
      if ((t + 1) % config.log_every == 0 || t + 1 == config.total_iters) {
        log_cameras(s, inputs, config, result.report);
      }
      if (config.checkpoint_every > 0 && (t + 1) % config.checkpoint_every == 0) {
        result.checkpoints.push_back({t + 1, s.bank, s.scene, s.log_s});
      }
    } catch (const NumericalFailure& e) {
      const std::string msg = "iteration " + std::to_string(t) + ": " + e.what();
      if (on_failure) on_failure(s, msg);
      throw NumericalFailure(msg);
    }
  }
  if (result.checkpoints.empty() || result.checkpoints.back().iteration != s.iteration) {
    result.checkpoints.push_back({s.iteration, s.bank, s.scene, s.log_s});
  }
  return result;
}

}  // namespace pcm
