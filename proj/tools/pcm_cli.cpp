// pcm: generate synthetic data, train, evaluate and run the ablation grid.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "pcm/config.hpp"
#include "pcm/error.hpp"
#include "pcm/experiment.hpp"
#include "pcm/io.hpp"

using namespace pcm;

namespace {

struct Common {
  std::string config_path;
  std::string preset_name;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "experiment config (JSON)");
  cmd->add_option("--preset", c.preset_name, "built-in config: reference or desk-outlier");
  cmd->add_option("--seed", c.seed, "overrides the config seed");
  cmd->add_option("--out", c.out, "output directory");
}

ExperimentConfig resolve(const Common& c) {
  if (!c.config_path.empty() && !c.preset_name.empty()) throw InvalidArgument("--config and --preset are exclusive");
  ExperimentConfig cfg = c.config_path.empty() ? preset(c.preset_name.empty() ? "desk-outlier" : c.preset_name)
                                               : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return buf;
}

int cmd_generate(const Common& c) {
  const ExperimentConfig cfg = resolve(c);
  const Dataset d = generate_dataset(cfg);
  const fs::path out = c.out;
  write_dataset(out, d);
  write_text_file(out / "config.json", config_to_json(cfg));
  int outliers = 0;
  for (bool f : d.rig.outlier_flags) outliers += f ? 1 : 0;
  const Json manifest = {{"config_hash", config_hash(cfg)},
                         {"seed", cfg.seed},
                         {"cameras", d.rig.size()},
                         {"outliers", outliers},
                         {"width", d.rig.intrinsics.width},
                         {"height", d.rig.intrinsics.height},
                         {"created", timestamp()}};
  write_text_file(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "generated " << d.rig.size() << " cameras (" << outliers << " outliers) in " << out.string() << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& data_dir, const std::string& ablate) {
  const ExperimentConfig cfg = resolve(c);
  const Ablation a = parse_ablation(ablate);
  const fs::path data_path = data_dir.empty() ? fs::path(c.out) : fs::path(data_dir);
  if (!fs::exists(data_path / "scene.json")) {
    throw IoError("no generated data in " + data_path.string() + " (run 'pcm generate' first)");
  }
  const Dataset d = read_dataset(data_path);
  if (d.rig.size() != cfg.rig.n_cameras) throw InvalidArgument("data in " + data_path.string() + " does not match the config");
  TrainConfig t = apply_ablation(cfg.train, a);
  t.seed = cfg.seed;
  const auto result = train(make_inputs(d), t, [&](const TrainState& s, const std::string& msg) {
    write_checkpoint(fs::path(c.out) / "failure", {s.iteration, s.bank, s.scene, s.log_s});
    std::cerr << "diagnostic state written to " << (fs::path(c.out) / "failure").string() << ": " << msg << "\n";
  });
  const auto metrics = evaluate_state(d, result.state.scene, result.state.bank, cfg.eval, cfg.seed);
  const auto summary = summarize_run(d, result.state.bank, metrics, t.kappa);
  write_run(c.out, cfg, a, result, metrics, summary);
  std::printf("cd %.4f  f %.4f  sigma_bar inlier %.4f outlier %.4f  inlier rot %.3f deg\n", metrics.chamfer.cd,
              metrics.fscore.f, summary.mean_sigma_inlier, summary.mean_sigma_outlier, summary.mean_rot_inlier);
  return 0;
}

int cmd_eval(const Common& c, const std::string& checkpoint, const std::string& data_dir, const std::string& points,
             const std::string& gt) {
  const ExperimentConfig cfg = resolve(c);
  Json metrics;
  if (!points.empty() || !gt.empty()) {
    if (points.empty() || gt.empty()) throw InvalidArgument("--points and --gt go together");
    const auto a = read_points(points);
    const auto b = read_points(gt);
    const auto cd = chamfer_l1(a, b);
    const auto f = f_score(a, b, cfg.eval.tau);
    metrics = {{"cd", cd.cd},         {"accuracy", cd.accuracy}, {"completeness", cd.completeness},
               {"f_score", f.f},      {"precision", f.precision}, {"recall", f.recall},
               {"per_camera_pose_errors", Json::array()}};
  } else {
    if (checkpoint.empty()) throw InvalidArgument("eval needs --checkpoint or --points/--gt");
    const fs::path data_path = data_dir.empty() ? fs::path(c.out) : fs::path(data_dir);
    if (!fs::exists(data_path / "scene.json")) throw IoError("no generated data in " + data_path.string());
    const Dataset d = read_dataset(data_path);
    const Checkpoint ck = read_checkpoint(checkpoint);
    if (ck.bank.size() != d.rig.size()) throw InvalidArgument("checkpoint camera count differs from the data");
    metrics = metrics_to_json(evaluate_state(d, ck.scene, ck.bank, cfg.eval, cfg.seed));
  }
  const std::string text = metrics.dump(2) + "\n";
  write_text_file(fs::path(c.out) / "metrics.json", text);
  std::cout << text;
  return 0;
}

int cmd_ablate(const Common& c) {
  ExperimentConfig cfg = resolve(c);
  if (c.seed) cfg.seed_set = {*c.seed};
  const auto rows = run_ablation_grid(cfg);
  const std::string csv = ablation_csv(rows, config_hash(cfg));
  write_text_file(fs::path(c.out) / "ablation.csv", csv);
  std::cout << csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Probabilistic camera pose optimization on synthetic scenes"};
  app.require_subcommand(1);
  Common gen, tr, ev, ab;
  std::string data_dir, eval_data, ablate = "full", checkpoint, points, gt;

  auto* g = app.add_subcommand("generate", "write scene, rig, matches and GT images");
  add_common(g, gen);
  auto* t = app.add_subcommand("train", "train on generated data");
  add_common(t, tr);
  t->add_option("--data", data_dir, "generated data directory (default: --out)");
  t->add_option("--ablate", ablate, "full, no-damping, no-confidence, no-uncertainty, no-uncertainty-no-confidence");
  auto* e = app.add_subcommand("eval", "score a checkpoint or two point sets");
  add_common(e, ev);
  e->add_option("--checkpoint", checkpoint, "checkpoint directory (bank.json + scene.json)");
  e->add_option("--data", eval_data, "generated data directory (default: --out)");
  e->add_option("--points", points, "estimated points (stem of .bin/.json)");
  e->add_option("--gt", gt, "reference points (stem of .bin/.json)");
  auto* a = app.add_subcommand("ablate", "run the uncertainty x confidence grid");
  add_common(a, ab);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kValidation);
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr, data_dir, ablate);
    if (e->parsed()) return cmd_eval(ev, checkpoint, eval_data, points, gt);
    if (a->parsed()) return cmd_ablate(ab);
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return static_cast<int>(err.code());
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return static_cast<int>(ExitCode::kIo);
  }
  return 0;
}
