#include "pcm/config.hpp"

#include <cstdio>
#include <set>

#include "pcm/error.hpp"
#include "pcm/io.hpp"

namespace pcm {

std::vector<Sphere> default_spheres() {
  return {{Vec3(0.0, 0.0, 0.0), 0.45, true},
          {Vec3(0.4, 0.25, 0.1), 0.3, true},
          {Vec3(-0.3, 0.1, 0.35), 0.25, true}};
}

void ExperimentConfig::validate() const {
  const auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw InvalidArgument(msg);
  };
  need(!scene.spheres.empty(), "scene.spheres must not be empty");
  need(scene.init_radius_jitter >= 0.0 && scene.init_radius_jitter < 1.0, "scene.init_radius_jitter must be in [0, 1)");
  need(scene.init_center_jitter >= 0.0, "scene.init_center_jitter must be >= 0");
  AnalyticScene::make(scene.spheres, scene.color_seed).validate();
  need(rig.n_cameras >= 2, "rig.n_cameras must be >= 2");
  need(rig.radius > 1.0, "rig.radius must exceed the unit scene radius");
  try {
    rig.intrinsics.validate();
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(std::string("rig.intrinsics: ") + e.what());
  }
  outliers.validate();
  need(matches.n_surface_points >= 100, "matches.n_surface_points must be >= 100");
  need(matches.reproj_threshold_px > 0.0, "matches.reproj_threshold_px must be > 0");
  need(render.n_samples >= 2, "render.n_samples must be >= 2");
  need(render.sharpness > 0.0, "render.sharpness must be > 0");
  train.validate();
  need(eval.n_points >= 1, "eval.n_points must be >= 1");
  need(eval.tau > 0.0, "eval.tau must be > 0");
  need(!seed_set.empty(), "seed_set must not be empty");
}

ExperimentConfig preset(const std::string& name) {
  ExperimentConfig c;
  c.scene.spheres = default_spheres();
  if (name == "reference") return c;
  if (name == "desk-outlier") {
    c.name = name;
    TrainConfig& t = c.train;
    t.total_iters = 4000;
    t.t_warm = 267;
    t.t_ramp = 533;
    t.batch_rays = 64;
    t.n_samples = 48;
    // A blurry start biases the poses toward a smaller silhouette; 4000
    // iterations are too few for the sharpness to recover from 10.
    t.init_sharpness = 100.0;
    t.grid_resolution = 24;
    t.kernel_sigma = default_kernel_sigma(kDefaultGridResolution);
    t.eikonal_points = 16;
    t.eta0_pose = 3e-3;
    t.eta_logvar = 3e-3;
    t.eta_net = 3e-3;
    t.confidence_update_every = 50;
    t.log_every = 100;
    c.render.n_samples = 96;
    c.eval.n_points = 5000;
    return c;
  }
  throw InvalidArgument("unknown preset '" + name + "'");
}

std::vector<std::string> preset_names() { return {"reference", "desk-outlier"}; }

namespace {

Json vec_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

Json to_json(const ExperimentConfig& c) {
  Json spheres = Json::array();
  for (const auto& s : c.scene.spheres) {
    spheres.push_back({{"center", vec_json(s.center)}, {"radius", s.radius}, {"learnable", s.learnable}});
  }
  const TrainConfig& t = c.train;
  const Intrinsics& k = c.rig.intrinsics;
  return {
      {"schema_version", kConfigSchemaVersion},
      {"name", c.name},
      {"seed", c.seed},
      {"seed_set", c.seed_set},
      {"scene",
       {{"spheres", spheres},
        {"color_seed", c.scene.color_seed},
        {"init_radius_jitter", c.scene.init_radius_jitter},
        {"init_center_jitter", c.scene.init_center_jitter}}},
      {"rig",
       {{"n_cameras", c.rig.n_cameras},
        {"radius", c.rig.radius},
        {"intrinsics",
         {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}}}},
      {"outliers",
       {{"fraction", c.outliers.fraction},
        {"rot_deg", {c.outliers.rot_deg.first, c.outliers.rot_deg.second}},
        {"trans", {c.outliers.trans.first, c.outliers.trans.second}},
        {"inlier_rot_deg", c.outliers.inlier_rot_deg},
        {"inlier_trans", c.outliers.inlier_trans}}},
      {"matches",
       {{"n_surface_points", c.matches.n_surface_points}, {"reproj_threshold_px", c.matches.reproj_threshold_px}}},
      {"render", {{"n_samples", c.render.n_samples}, {"sharpness", c.render.sharpness}}},
      {"train",
       {{"total_iters", t.total_iters},
        {"batch_rays", t.batch_rays},
        {"lambda_eik", t.lambda_eik},
        {"lambda_iou", t.lambda_iou},
        {"lambda_unc", t.lambda_unc},
        {"kappa", t.kappa},
        {"t_warm", t.t_warm},
        {"t_ramp", t.t_ramp},
        {"eta0_pose", t.eta0_pose},
        {"eta_logvar", t.eta_logvar},
        {"eta_net", t.eta_net},
        {"lr_schedule", t.lr_schedule == LrScheduleKind::kCosine ? "cosine" : "exponential"},
        {"lr_floor", t.lr_floor},
        {"confidence_update_every", t.confidence_update_every},
        {"confidence_alpha", t.confidence_alpha},
        {"buffer_capacity", t.buffer_capacity},
        {"buffer_pair_epoch", t.buffer_pair_epoch},
        {"n_match", t.n_match},
        {"top_k", t.top_k},
        {"grid_resolution", t.grid_resolution},
        {"kernel_sigma", t.kernel_sigma},
        {"base_variance", t.base_variance},
        {"pair_steps", t.pair_steps},
        {"balance_steps", t.balance_steps},
        {"eikonal_points", t.eikonal_points},
        {"n_samples", t.n_samples},
        {"init_sharpness", t.init_sharpness},
        {"confidence_grounding", t.confidence_grounding},
        {"adaptive_sampling", t.adaptive_sampling},
        {"optimize_poses", t.optimize_poses},
        {"checkpoint_every", t.checkpoint_every},
        {"log_every", t.log_every},
        {"blur",
         {{"enabled", t.blur.enabled},
          {"init_fraction", t.blur.init_fraction},
          {"plateau_factor", t.blur.plateau_factor},
          {"patience", t.blur.patience},
          {"window", t.blur.window}}}}},
      {"eval", {{"n_points", c.eval.n_points}, {"tau", c.eval.tau}}},
  };
}

/// Reads keys of one JSON object, remembering which were consumed so the
/// leftovers can be reported.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidArgument(name_or_root() + " must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw InvalidArgument(dotted(key) + " has the wrong type");
    }
  }

  void get_range(const char* key, std::pair<double, double>& out) {
    std::vector<double> v{out.first, out.second};
    get(key, v);
    if (v.size() != 2) throw InvalidArgument(dotted(key) + " must hold 2 numbers");
    out = {v[0], v[1]};
  }

  Section sub(const char* key) {
    seen_.insert(key);
    static const Json empty = Json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, dotted(key));
  }

  bool has(const char* key) const { return j_.contains(key); }
  const Json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw InvalidArgument("unknown config key '" + dotted(item.key()) + "'");
    }
  }

  std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string name_or_root() const { return path_.empty() ? "config" : path_; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Vec3 read_vec(const Json& j, const std::string& where) {
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const Json::exception&) {
  }
  if (v.size() != 3) throw InvalidArgument(where + " must hold 3 numbers");
  return {v[0], v[1], v[2]};
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

ExperimentConfig config_from_json(const std::string& text) {
  const Json j = parse_json(text, "config");
  Section root(j, "");
  int version = kConfigSchemaVersion;
  root.get("schema_version", version);
  if (version != kConfigSchemaVersion) throw InvalidArgument("schema_version " + std::to_string(version) + " is not supported");

  ExperimentConfig c = preset("reference");
  root.get("name", c.name);
  root.get("seed", c.seed);
  root.get("seed_set", c.seed_set);

  Section scene = root.sub("scene");
  if (scene.has("spheres")) {
    const Json& list = scene.raw("spheres");
    if (!list.is_array()) throw InvalidArgument("scene.spheres must be an array");
    c.scene.spheres.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section s(list[i], "scene.spheres[" + std::to_string(i) + "]");
      Sphere sp;
      Json center = vec_json(sp.center);
      s.get("center", center);
      sp.center = read_vec(center, s.dotted("center"));
      s.get("radius", sp.radius);
      s.get("learnable", sp.learnable);
      s.finish();
      c.scene.spheres.push_back(sp);
    }
  }
  scene.get("color_seed", c.scene.color_seed);
  scene.get("init_radius_jitter", c.scene.init_radius_jitter);
  scene.get("init_center_jitter", c.scene.init_center_jitter);
  scene.finish();

  Section rig = root.sub("rig");
  rig.get("n_cameras", c.rig.n_cameras);
  rig.get("radius", c.rig.radius);
  Section k = rig.sub("intrinsics");
  k.get("fx", c.rig.intrinsics.fx);
  k.get("fy", c.rig.intrinsics.fy);
  k.get("cx", c.rig.intrinsics.cx);
  k.get("cy", c.rig.intrinsics.cy);
  k.get("width", c.rig.intrinsics.width);
  k.get("height", c.rig.intrinsics.height);
  k.finish();
  rig.finish();

  Section out = root.sub("outliers");
  out.get("fraction", c.outliers.fraction);
  out.get_range("rot_deg", c.outliers.rot_deg);
  out.get_range("trans", c.outliers.trans);
  out.get("inlier_rot_deg", c.outliers.inlier_rot_deg);
  out.get("inlier_trans", c.outliers.inlier_trans);
  out.finish();

  Section m = root.sub("matches");
  m.get("n_surface_points", c.matches.n_surface_points);
  m.get("reproj_threshold_px", c.matches.reproj_threshold_px);
  m.finish();

  Section r = root.sub("render");
  r.get("n_samples", c.render.n_samples);
  r.get("sharpness", c.render.sharpness);
  r.finish();

  TrainConfig& t = c.train;
  Section tr = root.sub("train");
  tr.get("total_iters", t.total_iters);
  tr.get("batch_rays", t.batch_rays);
  tr.get("lambda_eik", t.lambda_eik);
  tr.get("lambda_iou", t.lambda_iou);
  tr.get("lambda_unc", t.lambda_unc);
  tr.get("kappa", t.kappa);
  tr.get("t_warm", t.t_warm);
  tr.get("t_ramp", t.t_ramp);
  tr.get("eta0_pose", t.eta0_pose);
  tr.get("eta_logvar", t.eta_logvar);
  tr.get("eta_net", t.eta_net);
  std::string schedule = t.lr_schedule == LrScheduleKind::kCosine ? "cosine" : "exponential";
  tr.get("lr_schedule", schedule);
  if (schedule == "cosine") {
    t.lr_schedule = LrScheduleKind::kCosine;
  } else if (schedule == "exponential") {
    t.lr_schedule = LrScheduleKind::kExponential;
  } else {
    throw InvalidArgument("train.lr_schedule must be 'cosine' or 'exponential'");
  }
  tr.get("lr_floor", t.lr_floor);
  tr.get("confidence_update_every", t.confidence_update_every);
  tr.get("confidence_alpha", t.confidence_alpha);
  tr.get("buffer_capacity", t.buffer_capacity);
  tr.get("buffer_pair_epoch", t.buffer_pair_epoch);
  tr.get("n_match", t.n_match);
  tr.get("top_k", t.top_k);
  tr.get("grid_resolution", t.grid_resolution);
  tr.get("kernel_sigma", t.kernel_sigma);
  tr.get("base_variance", t.base_variance);
  tr.get("pair_steps", t.pair_steps);
  tr.get("balance_steps", t.balance_steps);
  tr.get("eikonal_points", t.eikonal_points);
  tr.get("n_samples", t.n_samples);
  tr.get("init_sharpness", t.init_sharpness);
  tr.get("confidence_grounding", t.confidence_grounding);
  tr.get("adaptive_sampling", t.adaptive_sampling);
  tr.get("optimize_poses", t.optimize_poses);
  tr.get("checkpoint_every", t.checkpoint_every);
  tr.get("log_every", t.log_every);
  Section b = tr.sub("blur");
  b.get("enabled", t.blur.enabled);
  b.get("init_fraction", t.blur.init_fraction);
  b.get("plateau_factor", t.blur.plateau_factor);
  b.get("patience", t.blur.patience);
  b.get("window", t.blur.window);
  b.finish();
  tr.finish();

  Section e = root.sub("eval");
  e.get("n_points", c.eval.n_points);
  e.get("tau", c.eval.tau);
  e.finish();

  root.finish();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  try {
    return config_from_json(text);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.offset());
  } catch (const InvalidArgument& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

std::string config_hash(const ExperimentConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pcm
