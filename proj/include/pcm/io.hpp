#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcm/eval.hpp"
#include "pcm/probpose.hpp"
#include "pcm/scene.hpp"
#include "pcm/trainer.hpp"

namespace pcm {

namespace fs = std::filesystem;
using Json = nlohmann::json;

inline constexpr int kFileSchemaVersion = 1;

std::string read_text_file(const fs::path& path);
/// Creates parent directories as needed.
void write_text_file(const fs::path& path, const std::string& text);

/// Parses JSON; malformed input throws ParseError carrying the byte offset.
Json parse_json(const std::string& text, const std::string& source);

Json pose_to_json(const PoseMean& pose);
PoseMean pose_from_json(const Json& j);

Json scene_to_json(const AnalyticScene& scene);
AnalyticScene scene_from_json(const Json& j);

Json rig_to_json(const CameraRig& rig);
CameraRig rig_from_json(const Json& j);

Json matches_to_json(const MatchTable& matches);
MatchTable matches_from_json(const Json& j);

/// Float32 little-endian payload `<stem>.bin` next to a JSON header `<stem>.json`.
void write_image(const fs::path& stem, const Image& image, int camera);
Image read_image(const fs::path& stem);

void write_points(const fs::path& stem, const std::vector<Vec3>& points);
std::vector<Vec3> read_points(const fs::path& stem);

/// Everything a training run consumes, as produced by `generate`.
struct Dataset {
  AnalyticScene truth;
  AnalyticScene init_scene;
  CameraRig rig;
  MatchTable matches;
  GroundTruthImages images;
};

void write_dataset(const fs::path& dir, const Dataset& data);
Dataset read_dataset(const fs::path& dir);

Json bank_to_json(const ProbabilisticPoseBank& bank);
ProbabilisticPoseBank bank_from_json(const Json& j);

Json scene_params_to_json(const AnalyticScene& scene, double log_s);
/// Returns the scene and writes the stored log-sharpness into `log_s`.
AnalyticScene scene_params_from_json(const Json& j, double& log_s);

/// bank.json + scene.json inside `dir`.
void write_checkpoint(const fs::path& dir, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const fs::path& dir);

/// Per-iteration loss table and per-camera table. Numbers are printed with
/// 17 significant digits so identical runs give identical bytes.
std::string losses_csv(const std::vector<LossRow>& rows);
std::string cameras_csv(const std::vector<CameraRow>& rows);

Json metrics_to_json(const ReconstructionMetrics& m);

}  // namespace pcm
