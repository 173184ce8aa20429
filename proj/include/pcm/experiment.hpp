#pragma once

#include <string>
#include <vector>

#include "pcm/config.hpp"
#include "pcm/eval.hpp"
#include "pcm/io.hpp"
#include "pcm/trainer.hpp"

namespace pcm {

/// Synthetic scene, rig with injected outliers, matches and GT images for
/// `config.seed`. Deterministic.
Dataset generate_dataset(const ExperimentConfig& config);

/// Initial scene: the true spheres with jittered centers and radii.
AnalyticScene perturb_scene(const AnalyticScene& truth, const SceneSpec& spec, std::uint64_t seed);

TrainInputs make_inputs(const Dataset& data);

enum class Ablation { kFull, kNoDamping, kNoConfidence, kNoUncertainty, kNoUncertaintyNoConfidence };

/// Accepts full, no-damping, no-confidence, no-uncertainty,
/// no-uncertainty-no-confidence.
Ablation parse_ablation(const std::string& name);
std::string ablation_name(Ablation a);

/// no-damping: kappa = 0. no-confidence: static confidences replaced by 0.5.
/// no-uncertainty: kappa = 0 and lambda_unc = 0.
TrainConfig apply_ablation(TrainConfig train, Ablation a);

/// Metrics of a trained state against the dataset truth. Both surfaces are
/// sampled with the same seed.
ReconstructionMetrics evaluate_state(const Dataset& data, const AnalyticScene& scene,
                                     const ProbabilisticPoseBank& bank, const EvalSpec& spec, std::uint64_t seed);

struct RunSummary {
  double mean_sigma_inlier = 0.0;
  double mean_sigma_outlier = 0.0;
  double mean_rot_inlier = 0.0;   // degrees, after alignment
  double max_rot_inlier = 0.0;
  double mean_trans_inlier = 0.0;
  double mean_rot_outlier = 0.0;
};

struct RunOutcome {
  Dataset data;
  TrainResult result;
  ReconstructionMetrics metrics;
  RunSummary summary;
};

RunSummary summarize_run(const Dataset& data, const ProbabilisticPoseBank& bank, const ReconstructionMetrics& m,
                         double kappa);

RunOutcome run_experiment(const ExperimentConfig& config, Ablation ablation = Ablation::kFull);

/// One row of the 2 x 2 {uncertainty} x {confidence grounding} table.
struct AblationRow {
  std::string name;
  bool uncertainty = true;
  bool confidence = true;
  std::vector<double> cd;  // per seed
  double mean_cd = 0.0;
  double mean_f = 0.0;
  double mean_rot_deg = 0.0;
  double mean_trans = 0.0;
  bool best_cd = false;
};

std::vector<Ablation> ablation_grid();
std::vector<AblationRow> run_ablation_grid(const ExperimentConfig& config);
std::string ablation_csv(const std::vector<AblationRow>& rows, const std::string& hash);

/// Writes losses.csv, cameras.csv, summary.json and checkpoint directories
/// under `out`.
void write_run(const std::filesystem::path& out, const ExperimentConfig& config, Ablation ablation,
               const TrainResult& result, const ReconstructionMetrics& metrics, const RunSummary& summary);

}  // namespace pcm
