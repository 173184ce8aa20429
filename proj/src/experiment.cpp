#include "pcm/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "pcm/error.hpp"
#include "pcm/random.hpp"

namespace pcm {

AnalyticScene perturb_scene(const AnalyticScene& truth, const SceneSpec& spec, std::uint64_t seed) {
  Rng rng = make_rng(seed, stream::kSceneInit);
  AnalyticScene s = truth;
  for (auto& sp : s.spheres) {
    if (!sp.learnable) continue;
    sp.radius *= 1.0 + uniform(rng, -spec.init_radius_jitter, spec.init_radius_jitter);
    for (int a = 0; a < 3; ++a) sp.center[a] += uniform(rng, -spec.init_center_jitter, spec.init_center_jitter);
  }
  return s;
}

Dataset generate_dataset(const ExperimentConfig& config) {
  config.validate();
  Dataset d;
  d.truth = AnalyticScene::make(config.scene.spheres, config.scene.color_seed);
  d.init_scene = perturb_scene(d.truth, config.scene, config.seed);
  const CameraRig clean = generate_cameras(d.truth, config.rig.n_cameras, config.rig.radius, config.rig.intrinsics,
                                           config.seed);
  d.rig = inject_outliers(clean, config.outliers, config.seed);
  d.matches = simulate_matches(d.truth, d.rig, config.matches.n_surface_points, config.matches.reproj_threshold_px,
                               config.seed);
  d.images = render_gt_images(d.truth, d.rig,
                              RenderParams::for_rig(config.rig.radius, config.render.n_samples, config.render.sharpness));
  return d;
}

TrainInputs make_inputs(const Dataset& data) { return {data.init_scene, data.rig, data.matches, data.images}; }

namespace {
const std::pair<Ablation, const char*> kAblationNames[] = {
    {Ablation::kFull, "full"},
    {Ablation::kNoDamping, "no-damping"},
    {Ablation::kNoConfidence, "no-confidence"},
    {Ablation::kNoUncertainty, "no-uncertainty"},
    {Ablation::kNoUncertaintyNoConfidence, "no-uncertainty-no-confidence"},
};
}  // namespace

Ablation parse_ablation(const std::string& name) {
  for (const auto& [a, n] : kAblationNames) {
    if (name == n) return a;
  }
  throw InvalidArgument("unknown ablation '" + name + "'");
}

std::string ablation_name(Ablation a) {
  for (const auto& [v, n] : kAblationNames) {
    if (v == a) return n;
  }
  return "?";
}

TrainConfig apply_ablation(TrainConfig t, Ablation a) {
  switch (a) {
    case Ablation::kFull:
      break;
    case Ablation::kNoDamping:
      t.kappa = 0.0;
      break;
    case Ablation::kNoConfidence:
      t.confidence_grounding = false;
      break;
    case Ablation::kNoUncertainty:
      t.kappa = 0.0;
      t.lambda_unc = 0.0;
      break;
    case Ablation::kNoUncertaintyNoConfidence:
      t.kappa = 0.0;
      t.lambda_unc = 0.0;
      t.confidence_grounding = false;
      break;
  }
  return t;
}

ReconstructionMetrics evaluate_state(const Dataset& data, const AnalyticScene& scene,
                                     const ProbabilisticPoseBank& bank, const EvalSpec& spec, std::uint64_t seed) {
  const auto est = sample_surface(scene, spec.n_points, seed);
  const auto gt = sample_surface(data.truth, spec.n_points, seed);
  return evaluate_reconstruction(est, bank.means, gt, data.rig.true_poses, spec.tau);
}

RunSummary summarize_run(const Dataset& data, const ProbabilisticPoseBank& bank, const ReconstructionMetrics& m,
                         double kappa) {
  const auto u = summarize(bank, kappa);
  RunSummary s;
  int n_in = 0, n_out = 0;
  for (int i = 0; i < bank.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (data.rig.outlier_flags[k]) {
      s.mean_sigma_outlier += u.sigma_bar[k];
      s.mean_rot_outlier += m.pose_errors[k].rot_deg;
      ++n_out;
    } else {
      s.mean_sigma_inlier += u.sigma_bar[k];
      s.mean_rot_inlier += m.pose_errors[k].rot_deg;
      s.max_rot_inlier = std::max(s.max_rot_inlier, m.pose_errors[k].rot_deg);
      s.mean_trans_inlier += m.pose_errors[k].trans;
      ++n_in;
    }
  }
  if (n_in > 0) {
    s.mean_sigma_inlier /= n_in;
    s.mean_rot_inlier /= n_in;
    s.mean_trans_inlier /= n_in;
  }
  if (n_out > 0) {
    s.mean_sigma_outlier /= n_out;
    s.mean_rot_outlier /= n_out;
  }
  return s;
}

RunOutcome run_experiment(const ExperimentConfig& config, Ablation ablation) {
  RunOutcome out;
  out.data = generate_dataset(config);
  TrainConfig t = apply_ablation(config.train, ablation);
  t.seed = config.seed;
  out.result = train(make_inputs(out.data), t);
  out.metrics = evaluate_state(out.data, out.result.state.scene, out.result.state.bank, config.eval, config.seed);
  out.summary = summarize_run(out.data, out.result.state.bank, out.metrics, t.kappa);
  return out;
}

std::vector<Ablation> ablation_grid() {
  return {Ablation::kFull, Ablation::kNoConfidence, Ablation::kNoUncertainty, Ablation::kNoUncertaintyNoConfidence};
}

std::vector<AblationRow> run_ablation_grid(const ExperimentConfig& config) {
  std::vector<AblationRow> rows;
  for (Ablation a : ablation_grid()) {
    AblationRow row;
    row.name = ablation_name(a);
    row.uncertainty = a == Ablation::kFull || a == Ablation::kNoConfidence;
    row.confidence = a == Ablation::kFull || a == Ablation::kNoUncertainty;
    for (std::uint64_t seed : config.seed_set) {
      ExperimentConfig c = config;
      c.seed = seed;
      const RunOutcome r = run_experiment(c, a);
      row.cd.push_back(r.metrics.chamfer.cd);
      row.mean_f += r.metrics.fscore.f;
      double rot = 0.0, trans = 0.0;
      for (const auto& e : r.metrics.pose_errors) {
        rot += e.rot_deg;
        trans += e.trans;
      }
      row.mean_rot_deg += rot / static_cast<double>(r.metrics.pose_errors.size());
      row.mean_trans += trans / static_cast<double>(r.metrics.pose_errors.size());
    }
    const double n = static_cast<double>(config.seed_set.size());
    for (double cd : row.cd) row.mean_cd += cd;
    row.mean_cd /= n;
    row.mean_f /= n;
    row.mean_rot_deg /= n;
    row.mean_trans /= n;
    rows.push_back(row);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].mean_cd < rows[best].mean_cd) best = i;
  }
  rows[best].best_cd = true;
  return rows;
}

std::string ablation_csv(const std::vector<AblationRow>& rows, const std::string& hash) {
  std::string s = "config,uncertainty,confidence,mean_cd,mean_f_score,mean_rot_deg,mean_trans,best_cd,config_hash\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%d,%.17g,%.17g,%.17g,%.17g,%d,%s\n", r.name.c_str(), r.uncertainty ? 1 : 0,
                  r.confidence ? 1 : 0, r.mean_cd, r.mean_f, r.mean_rot_deg, r.mean_trans, r.best_cd ? 1 : 0,
                  hash.c_str());
    s += buf;
  }
  return s;
}

void write_run(const std::filesystem::path& out, const ExperimentConfig& config, Ablation ablation,
               const TrainResult& result, const ReconstructionMetrics& metrics, const RunSummary& summary) {
  write_text_file(out / "losses.csv", losses_csv(result.report.losses));
  write_text_file(out / "cameras.csv", cameras_csv(result.report.cameras));
  for (const auto& c : result.checkpoints) {
    char name[32];
    std::snprintf(name, sizeof name, "ckpt_%07ld", c.iteration);
    write_checkpoint(out / "checkpoints" / name, c);
  }
  write_checkpoint(out / "checkpoint", result.checkpoints.back());
  const Json j = {{"config_hash", config_hash(config)},
                  {"ablation", ablation_name(ablation)},
                  {"seed", config.seed},
                  {"iterations", result.state.iteration},
                  {"metrics", metrics_to_json(metrics)},
                  {"mean_sigma_inlier", summary.mean_sigma_inlier},
                  {"mean_sigma_outlier", summary.mean_sigma_outlier},
                  {"mean_rot_inlier_deg", summary.mean_rot_inlier},
                  {"max_rot_inlier_deg", summary.max_rot_inlier},
                  {"mean_trans_inlier", summary.mean_trans_inlier},
                  {"mean_rot_outlier_deg", summary.mean_rot_outlier}};
  write_text_file(out / "summary.json", j.dump(2) + "\n");
}

}  // namespace pcm
