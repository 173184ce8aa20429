#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcm/scene.hpp"
#include "pcm/trainer.hpp"

namespace pcm {

inline constexpr int kConfigSchemaVersion = 1;

struct SceneSpec {
  std::vector<Sphere> spheres;
  std::uint64_t color_seed = 7;
  /// The training scene starts from the true spheres with radii scaled by
  /// 1 + U(-r, r) and centers moved by U(-c, c) per axis.
  double init_radius_jitter = 0.1;
  double init_center_jitter = 0.05;
};

struct RigSpec {
  int n_cameras = 12;
  double radius = 3.0;
  Intrinsics intrinsics;
};

struct MatchSpec {
  int n_surface_points = 2000;
  double reproj_threshold_px = 1.0;
};

/// Test-mode rendering of the ground-truth images.
struct GtRenderSpec {
  int n_samples = 128;
  double sharpness = 200.0;
};

struct EvalSpec {
  int n_points = 20000;
  double tau = 0.64;
};

struct ExperimentConfig {
  std::string name = "reference";
  SceneSpec scene;
  RigSpec rig;
  OutlierSpec outliers;
  MatchSpec matches;
  GtRenderSpec render;
  TrainConfig train;
  EvalSpec eval;
  /// Seed of a single run; every random stream is derived from it.
  std::uint64_t seed = 1;
  /// Shared seed grid of the ablation table.
  std::vector<std::uint64_t> seed_set{1, 2, 3, 4, 5};

  /// Throws InvalidArgument naming the offending dotted key.
  void validate() const;
};

/// Three overlapping spheres inside the unit ball.
std::vector<Sphere> default_spheres();

ExperimentConfig preset(const std::string& name);
std::vector<std::string> preset_names();

/// Canonical JSON text (sorted keys, shortest round-trip numbers).
std::string config_to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected by dotted name.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);

/// 64-bit FNV-1a of the canonical JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace pcm
