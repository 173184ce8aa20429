#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pcm/confidence.hpp"
#include "pcm/optim.hpp"
#include "pcm/probpose.hpp"
#include "pcm/renderer.hpp"
#include "pcm/scene.hpp"
#include "pcm/vda.hpp"

namespace pcm {

struct BlurConfig {
  bool enabled = false;
  double init_fraction = 0.1;  // sigma_img = max(H, W) * init_fraction
  double plateau_factor = 0.8;
  int patience = 5;
  /// Iterations per schedule window; 0 scales the reference 50k-of-150k window.
  long window = 0;
};

struct TrainConfig {
  long total_iters = 150000;
  int batch_rays = 512;
  double lambda_eik = 0.1;
  double lambda_iou = 0.2;
  double lambda_unc = 0.05;
  double kappa = kDefaultKappa;
  long t_warm = 10000;
  long t_ramp = 20000;
  double eta0_pose = 5e-4;
  double eta_logvar = 5e-4;
  double eta_net = 5e-4;
  LrScheduleKind lr_schedule = LrScheduleKind::kCosine;
  double lr_floor = 1e-2;
  int confidence_update_every = 100;
  double confidence_alpha = kDefaultBlendAlpha;
  int buffer_capacity = kDefaultBufferCapacity;
  /// Use floor(3 * pairs / n) instead of buffer_capacity.
  bool buffer_pair_epoch = false;
  int n_match = kDefaultMatchesPerPair;
  int top_k = kDefaultTopK;
  int grid_resolution = kDefaultGridResolution;
  /// Kernel width override; 0 means 6 / grid_resolution.
  double kernel_sigma = 0.0;
  double base_variance = kDefaultBaseVariance;
  int pair_steps = 1;
  int balance_steps = 1;
  int eikonal_points = 64;
  int n_samples = 64;
  double init_sharpness = 10.0;
  /// When false the static confidences are replaced by a uniform 0.5.
  bool confidence_grounding = true;
  /// Balance-pass cameras drawn in proportion to confidence (else uniformly).
  bool adaptive_sampling = true;
  /// When false the mean poses are held fixed (photometric-only fits).
  bool optimize_poses = true;
  long checkpoint_every = 0;
  int log_every = 50;
  std::uint64_t seed = 1;
  BlurConfig blur;

  void validate() const;
  double effective_sigma() const { return kernel_sigma > 0.0 ? kernel_sigma : default_kernel_sigma(grid_resolution); }
};

/// Weight of the uncertainty loss: 0 before t_warm, then a linear ramp to
/// lambda_unc over t_ramp iterations.
double unc_weight(long t, const TrainConfig& config);

struct LossComponents {
  double color = 0.0;
  double eikonal = 0.0;
  double iou = 0.0;
  double unc = 0.0;
};

struct LossBreakdown {
  double total = 0.0;
  double color = 0.0;
  double eikonal = 0.0;  // weighted
  double iou = 0.0;      // weighted
  double unc = 0.0;      // weighted
};

/// L_color + lambda_eik L_eik + lambda_iou L_iou + w_unc(t) L_unc. Throws
/// NumericalFailure naming the first non-finite component.
LossBreakdown total_loss(const LossComponents& c, long t, const TrainConfig& config);

/// Scales each camera's 6 mean-pose gradient entries by 1 / (1 + sigma_bar * kappa)
/// once t >= t_warm. Nothing else is touched.
void damp_pose_gradients(const ProbabilisticPoseBank& bank, std::span<double> pose_grads, double kappa, long t,
                         long t_warm);

struct BlurState {
  double sigma = 0.0;
  double best = 0.0;
  int stalls = 0;
  bool started = false;
};

/// Initializes the blur width from the image size.
BlurState blur_init(int height, int width, const BlurConfig& config);

/// Advances the schedule by one window whose mean total loss is `window_loss`:
/// a plateau of `patience` windows scales sigma by plateau_factor, otherwise
/// sigma <- 0.5 sigma + 0.5 * 20 * window_loss.
double blur_schedule(BlurState& state, double window_loss, const BlurConfig& config);

/// Separable Gaussian blur, clamped edges. sigma <= 0 returns the input.
Image gaussian_blur(const Image& image, double sigma);

struct TrainInputs {
  AnalyticScene scene;  // initial estimate; learnable spheres are optimized
  CameraRig rig;        // init poses seed the bank; true poses only feed the log
  MatchTable matches;
  GroundTruthImages images;
};

struct TrainState {
  ProbabilisticPoseBank bank;
  AnalyticScene scene;
  double log_s = 0.0;
  long iteration = 0;
  ConfidenceTracker tracker{std::vector<double>{}};
  OptimizerState pose_opt;
  OptimizerState logvar_opt;
  OptimizerState net_opt;
  double blur_sigma = 0.0;
};

struct LossRow {
  long iteration = 0;
  char phase = 'b';  // 'p' pair pass, 'b' balance pass
  int cam_a = -1;
  int cam_b = -1;
  double lr_pose = 0.0;
  double w_unc = 0.0;
  LossComponents raw;
  LossBreakdown weighted;
  double sharpness = 0.0;
  int vda_skipped = 0;
  double blur_sigma = 0.0;
};

struct CameraRow {
  long iteration = 0;
  int camera = 0;
  double gamma0 = 0.0;
  double gamma_hat = 0.0;
  double gamma = 0.0;
  double sigma_bar = 0.0;
  double damping = 1.0;
  double rot_err_deg = 0.0;
  double trans_err = 0.0;
};

struct Checkpoint {
  long iteration = 0;
  ProbabilisticPoseBank bank;
  AnalyticScene scene;
  double log_s = 0.0;
};

struct RunReport {
  std::vector<LossRow> losses;
  std::vector<CameraRow> cameras;
};

struct TrainResult {
  TrainState state;
  RunReport report;
  std::vector<Checkpoint> checkpoints;
};

/// Called with the last consistent state before a numerical failure propagates.
using FailureHook = std::function<void(const TrainState&, const std::string&)>;

TrainState init_state(const TrainInputs& inputs, const TrainConfig& config);

TrainResult train(const TrainInputs& inputs, const TrainConfig& config, const FailureHook& on_failure = {});

}  // namespace pcm
