#include "pcm/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pcm/error.hpp"

namespace pcm {

static_assert(std::endian::native == std::endian::little, "binary payloads are written little-endian");

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

Json parse_json(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    const std::size_t offset = e.byte;
    std::size_t line = 1;
    for (std::size_t i = 0; i + 1 < offset && i < text.size(); ++i) line += text[i] == '\n' ? 1 : 0;
    throw ParseError(source + ": malformed JSON at byte " + std::to_string(offset) + " (line " +
                         std::to_string(line) + ")",
                     offset);
  }
}

namespace {

Json vec_to_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

template <typename T>
T field(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw InvalidArgument(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw InvalidArgument(where + ": key '" + key + "' has the wrong type");
  }
}

Vec3 vec_field(const Json& j, const char* key, const std::string& where) {
  const auto a = field<std::vector<double>>(j, key, where);
  if (a.size() != 3) throw InvalidArgument(where + ": key '" + key + "' must hold 3 numbers");
  return {a[0], a[1], a[2]};
}

void write_binary(const fs::path& path, const std::vector<float>& data) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<float> read_binary(const fs::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<float> data(count);
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(float))) {
    throw IoError(path.string() + ": payload shorter than its header states");
  }
  in.peek();
  if (!in.eof()) throw IoError(path.string() + ": payload longer than its header states");
  return data;
}

fs::path with_ext(const fs::path& stem, const char* ext) {
  fs::path p = stem;
  p += ext;
  return p;
}

Json read_json_file(const fs::path& path) { return parse_json(read_text_file(path), path.string()); }

}  // namespace

Json pose_to_json(const PoseMean& pose) {
  return {{"rotation", vec_to_json(pose.rotation)}, {"translation", vec_to_json(pose.translation)}};
}

PoseMean pose_from_json(const Json& j) {
  PoseMean p;
  p.rotation = vec_field(j, "rotation", "pose");
  p.translation = vec_field(j, "translation", "pose");
  return p;
}

Json scene_to_json(const AnalyticScene& scene) {
  Json spheres = Json::array();
  for (const auto& s : scene.spheres) {
    spheres.push_back({{"center", vec_to_json(s.center)}, {"radius", s.radius}, {"learnable", s.learnable}});
  }
  return {{"spheres", spheres}, {"color_seed", scene.color_seed}, {"field_scale", scene.field_scale}};
}

AnalyticScene scene_from_json(const Json& j) {
  std::vector<Sphere> spheres;
  for (const auto& s : field<Json>(j, "spheres", "scene")) {
    spheres.push_back({vec_field(s, "center", "scene.spheres"), field<double>(s, "radius", "scene.spheres"),
                       field<bool>(s, "learnable", "scene.spheres")});
  }
  AnalyticScene scene = AnalyticScene::make(std::move(spheres), field<std::uint64_t>(j, "color_seed", "scene"));
  scene.field_scale = field<double>(j, "field_scale", "scene");
  scene.validate();
  return scene;
}

Json rig_to_json(const CameraRig& rig) {
  Json truth = Json::array(), init = Json::array();
  for (const auto& p : rig.true_poses) truth.push_back(pose_to_json(p));
  for (const auto& p : rig.init_poses) init.push_back(pose_to_json(p));
  std::vector<bool> flags(rig.outlier_flags.begin(), rig.outlier_flags.end());
  const Intrinsics& k = rig.intrinsics;
  return {{"true_poses", truth},
          {"init_poses", init},
          {"outlier_flags", flags},
          {"radius", rig.radius},
          {"intrinsics",
           {{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}}}};
}

CameraRig rig_from_json(const Json& j) {
  CameraRig rig;
  for (const auto& p : field<Json>(j, "true_poses", "rig")) rig.true_poses.push_back(pose_from_json(p));
  for (const auto& p : field<Json>(j, "init_poses", "rig")) rig.init_poses.push_back(pose_from_json(p));
  const auto flags = field<std::vector<bool>>(j, "outlier_flags", "rig");
  rig.outlier_flags.assign(flags.begin(), flags.end());
  rig.radius = field<double>(j, "radius", "rig");
  const Json k = field<Json>(j, "intrinsics", "rig");
  rig.intrinsics.fx = field<double>(k, "fx", "rig.intrinsics");
  rig.intrinsics.fy = field<double>(k, "fy", "rig.intrinsics");
  rig.intrinsics.cx = field<double>(k, "cx", "rig.intrinsics");
  rig.intrinsics.cy = field<double>(k, "cy", "rig.intrinsics");
  rig.intrinsics.width = field<int>(k, "width", "rig.intrinsics");
  rig.intrinsics.height = field<int>(k, "height", "rig.intrinsics");
  rig.validate();
  return rig;
}

Json matches_to_json(const MatchTable& matches) {
  Json pairs = Json::array();
  for (const auto& p : matches.pairs) {
    Json list = Json::array();
    for (const auto& c : p.matches) list.push_back({c.col_i, c.row_i, c.col_j, c.row_j});
    pairs.push_back({{"i", p.i}, {"j", p.j}, {"matches", list}});
  }
  return {{"n", matches.n}, {"counts", matches.counts}, {"pairs", pairs}};
}

MatchTable matches_from_json(const Json& j) {
  MatchTable m;
  m.n = field<int>(j, "n", "matches");
  m.counts = field<std::vector<int>>(j, "counts", "matches");
  if (m.n < 0 || m.counts.size() != static_cast<std::size_t>(m.n) * m.n) {
    throw InvalidArgument("matches: counts must be an n x n table");
  }
  for (const auto& p : field<Json>(j, "pairs", "matches")) {
    PairMatches pm;
    pm.i = field<int>(p, "i", "matches.pairs");
    pm.j = field<int>(p, "j", "matches.pairs");
    for (const auto& c : field<std::vector<std::array<int, 4>>>(p, "matches", "matches.pairs")) {
      pm.matches.push_back({c[0], c[1], c[2], c[3]});
    }
    if (pm.i < 0 || pm.j >= m.n || pm.i >= pm.j || static_cast<int>(pm.matches.size()) != m.count(pm.i, pm.j)) {
      throw InvalidArgument("matches: pair (" + std::to_string(pm.i) + ", " + std::to_string(pm.j) +
                            ") disagrees with the count table");
    }
    m.pairs.push_back(std::move(pm));
  }
  m.derive_neighborhoods();
  return m;
}

void write_image(const fs::path& stem, const Image& image, int camera) {
  const Json header = {{"schema_version", kFileSchemaVersion},
                       {"width", image.width},
                       {"height", image.height},
                       {"camera", camera},
                       {"channels", 3},
                       {"dtype", "float32"},
                       {"layout", "HWC"}};
  write_text_file(with_ext(stem, ".json"), header.dump(2) + "\n");
  write_binary(with_ext(stem, ".bin"), image.rgb);
}

Image read_image(const fs::path& stem) {
  const fs::path hp = with_ext(stem, ".json");
  const Json h = read_json_file(hp);
  const std::string where = hp.string();
  if (field<std::string>(h, "dtype", where) != "float32" || field<int>(h, "channels", where) != 3 ||
      field<std::string>(h, "layout", where) != "HWC") {
    throw InvalidArgument(where + ": only float32 HWC 3-channel images are supported");
  }
  Image img;
  img.width = field<int>(h, "width", where);
  img.height = field<int>(h, "height", where);
  if (img.width <= 0 || img.height <= 0) throw InvalidArgument(where + ": image size must be positive");
  img.rgb = read_binary(with_ext(stem, ".bin"), 3 * static_cast<std::size_t>(img.width) * img.height);
  return img;
}

void write_points(const fs::path& stem, const std::vector<Vec3>& points) {
  std::vector<float> data;
  data.reserve(3 * points.size());
  for (const auto& p : points) {
    for (int a = 0; a < 3; ++a) data.push_back(static_cast<float>(p[a]));
  }
  const Json header = {{"schema_version", kFileSchemaVersion},
                       {"count", points.size()},
                       {"channels", 3},
                       {"dtype", "float32"},
                       {"layout", "xyz"}};
  write_text_file(with_ext(stem, ".json"), header.dump(2) + "\n");
  write_binary(with_ext(stem, ".bin"), data);
}

std::vector<Vec3> read_points(const fs::path& stem) {
  const fs::path hp = with_ext(stem, ".json");
  const Json h = read_json_file(hp);
  const std::string where = hp.string();
  if (field<std::string>(h, "dtype", where) != "float32" || field<int>(h, "channels", where) != 3) {
    throw InvalidArgument(where + ": only float32 xyz points are supported");
  }
  const auto count = field<std::size_t>(h, "count", where);
  const auto data = read_binary(with_ext(stem, ".bin"), 3 * count);
  std::vector<Vec3> pts(count);
  for (std::size_t i = 0; i < count; ++i) pts[i] = Vec3(data[3 * i], data[3 * i + 1], data[3 * i + 2]);
  return pts;
}

void write_dataset(const fs::path& dir, const Dataset& data) {
  const Json j = {{"schema_version", kFileSchemaVersion},
                  {"units", "scene radius 1"},
                  {"pose_convention", "camera_to_world;axis_angle"},
                  {"scene", scene_to_json(data.truth)},
                  {"init_scene", scene_to_json(data.init_scene)},
                  {"rig", rig_to_json(data.rig)},
                  {"matches", matches_to_json(data.matches)}};
  write_text_file(dir / "scene.json", j.dump(2) + "\n");
  for (std::size_t i = 0; i < data.images.images.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cam_%03zu", i);
    write_image(dir / "images" / name, data.images.images[i], static_cast<int>(i));
  }
}

Dataset read_dataset(const fs::path& dir) {
  const Json j = read_json_file(dir / "scene.json");
  if (field<int>(j, "schema_version", "scene.json") != kFileSchemaVersion) {
    throw InvalidArgument("scene.json: unsupported schema_version");
  }
  Dataset d;
  d.truth = scene_from_json(field<Json>(j, "scene", "scene.json"));
  d.init_scene = scene_from_json(field<Json>(j, "init_scene", "scene.json"));
  d.rig = rig_from_json(field<Json>(j, "rig", "scene.json"));
  d.matches = matches_from_json(field<Json>(j, "matches", "scene.json"));
  for (int i = 0; i < d.rig.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "cam_%03d", i);
    d.images.images.push_back(read_image(dir / "images" / name));
  }
  return d;
}

Json bank_to_json(const ProbabilisticPoseBank& bank) {
  Json cams = Json::array();
  for (std::size_t i = 0; i < bank.means.size(); ++i) {
    cams.push_back({{"mean", pose_to_json(bank.means[i])},
                    {"log_var_rot", vec_to_json(bank.log_var_rot[i])},
                    {"log_var_trans", vec_to_json(bank.log_var_trans[i])}});
  }
  return {{"schema_version", kFileSchemaVersion}, {"pose_convention", "camera_to_world;axis_angle"}, {"cameras", cams}};
}

ProbabilisticPoseBank bank_from_json(const Json& j) {
  ProbabilisticPoseBank bank;
  for (const auto& c : field<Json>(j, "cameras", "bank")) {
    bank.means.push_back(pose_from_json(field<Json>(c, "mean", "bank.cameras")));
    bank.log_var_rot.push_back(vec_field(c, "log_var_rot", "bank.cameras"));
    bank.log_var_trans.push_back(vec_field(c, "log_var_trans", "bank.cameras"));
  }
  bank.validate();
  return bank;
}

Json scene_params_to_json(const AnalyticScene& scene, double log_s) {
  return {{"schema_version", kFileSchemaVersion}, {"scene", scene_to_json(scene)}, {"log_sharpness", log_s}};
}

AnalyticScene scene_params_from_json(const Json& j, double& log_s) {
  log_s = field<double>(j, "log_sharpness", "scene params");
  return scene_from_json(field<Json>(j, "scene", "scene params"));
}

void write_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  Json bank = bank_to_json(ckpt.bank);
  bank["iteration"] = ckpt.iteration;
  write_text_file(dir / "bank.json", bank.dump(2) + "\n");
  write_text_file(dir / "scene.json", scene_params_to_json(ckpt.scene, ckpt.log_s).dump(2) + "\n");
}

Checkpoint read_checkpoint(const fs::path& dir) {
  Checkpoint c;
  const Json bank = read_json_file(dir / "bank.json");
  c.bank = bank_from_json(bank);
  c.iteration = field<long>(bank, "iteration", "bank.json");
  c.scene = scene_params_from_json(read_json_file(dir / "scene.json"), c.log_s);
  return c;
}

namespace {
void put(std::string& s, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, ",%.17g", v);
  s += buf;
}
}  // namespace

std::string losses_csv(const std::vector<LossRow>& rows) {
  std::string s =
      "iteration,phase,cam_a,cam_b,lr_pose,w_unc,color,eikonal,iou,unc,total,w_color,w_eikonal,w_iou,w_unc_term,"
      "sharpness,vda_skipped,blur_sigma\n";
  for (const auto& r : rows) {
    s += std::to_string(r.iteration) + "," + r.phase + "," + std::to_string(r.cam_a) + "," + std::to_string(r.cam_b);
    for (double v : {r.lr_pose, r.w_unc, r.raw.color, r.raw.eikonal, r.raw.iou, r.raw.unc, r.weighted.total,
                     r.weighted.color, r.weighted.eikonal, r.weighted.iou, r.weighted.unc, r.sharpness}) {
      put(s, v);
    }
    s += "," + std::to_string(r.vda_skipped);
    put(s, r.blur_sigma);
    s += "\n";
  }
  return s;
}

std::string cameras_csv(const std::vector<CameraRow>& rows) {
  std::string s = "iteration,camera,gamma0,gamma_hat,gamma,sigma_bar,damping,rot_err_deg,trans_err\n";
  for (const auto& r : rows) {
    s += std::to_string(r.iteration) + "," + std::to_string(r.camera);
    for (double v : {r.gamma0, r.gamma_hat, r.gamma, r.sigma_bar, r.damping, r.rot_err_deg, r.trans_err}) put(s, v);
    s += "\n";
  }
  return s;
}

Json metrics_to_json(const ReconstructionMetrics& m) {
  Json poses = Json::array();
  for (std::size_t i = 0; i < m.pose_errors.size(); ++i) {
    poses.push_back({{"camera", i}, {"rot_deg", m.pose_errors[i].rot_deg}, {"trans", m.pose_errors[i].trans}});
  }
  const auto& a = m.alignment;
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r) rot.push_back({a.rotation(r, 0), a.rotation(r, 1), a.rotation(r, 2)});
  return {{"cd", m.chamfer.cd},
          {"accuracy", m.chamfer.accuracy},
          {"completeness", m.chamfer.completeness},
          {"f_score", m.fscore.f},
          {"precision", m.fscore.precision},
          {"recall", m.fscore.recall},
          {"alignment", {{"scale", a.scale}, {"rotation", rot}, {"translation", vec_to_json(a.translation)}}},
          {"per_camera_pose_errors", poses}};
}

}  // namespace pcm
