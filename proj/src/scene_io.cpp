#include "artikin/scene_io.hpp"

#include <fstream>

#include "artikin/errors.hpp"
#include "artikin/ply.hpp"

namespace artikin {

using nlohmann::json;

namespace {

json vec_json(const Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
  if (!j.is_object() || !j.contains(key))
    throw ParseError(path + "." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(path + "." + key + ": " + e.what());
  }
}

Vector3d get_vec(const json& j, const char* key, const std::string& path) {
  auto v = get<std::vector<double>>(j, key, path);
  if (v.size() != 3) throw ParseError(path + "." + key + ": expected 3 numbers");
  return {v[0], v[1], v[2]};
}

Matrix3d get_mat(const json& j, const std::string& path) {
  std::vector<double> v;
  try {
    v = j.get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (v.size() != 9) throw ParseError(path + ": expected 9 numbers");
  Matrix3d m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = v[3 * r + c];
  return m;
}

}  // namespace

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

void save_gaussians(const fs::path& path, const std::vector<PlanarGaussian>& gs) {
  const std::size_t n = gs.size();
  const int k = n == 0 ? 0 : static_cast<int>(gs.front().seg_logits.size());
  PlyTable t;
  auto col = [&](const char* name, auto getter) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = getter(gs[i]);
    t.add(name, std::move(v));
  };
  col("x", [](const PlanarGaussian& g) { return g.center.x(); });
  col("y", [](const PlanarGaussian& g) { return g.center.y(); });
  col("z", [](const PlanarGaussian& g) { return g.center.z(); });
  col("quat_w", [](const PlanarGaussian& g) { return g.orientation.w(); });
  col("quat_x", [](const PlanarGaussian& g) { return g.orientation.x(); });
  col("quat_y", [](const PlanarGaussian& g) { return g.orientation.y(); });
  col("quat_z", [](const PlanarGaussian& g) { return g.orientation.z(); });
  col("scale_x", [](const PlanarGaussian& g) { return g.scale.x(); });
  col("scale_y", [](const PlanarGaussian& g) { return g.scale.y(); });
  col("scale_z", [](const PlanarGaussian& g) { return g.scale.z(); });
  col("opacity", [](const PlanarGaussian& g) { return g.opacity_logit; });
  col("r", [](const PlanarGaussian& g) { return g.color.x(); });
  col("g", [](const PlanarGaussian& g) { return g.color.y(); });
  col("b", [](const PlanarGaussian& g) { return g.color.z(); });
  for (int c = 0; c < k; ++c) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (gs[i].seg_logits.size() != k)
        throw InvariantError("gaussians[" + std::to_string(i) + "].seg_logits",
                             "inconsistent length");
      v[i] = gs[i].seg_logits[c];
    }
    t.add("seg_logit_" + std::to_string(c), std::move(v));
  }
  write_ply(path, t);
}

std::vector<PlanarGaussian> load_gaussians(const fs::path& path) {
  PlyTable t = read_ply(path);
  int k = 0;
  while (t.has("seg_logit_" + std::to_string(k))) ++k;
  const auto& x = t.column("x");
  const auto& y = t.column("y");
  const auto& z = t.column("z");
  const auto& qw = t.column("quat_w");
  const auto& qx = t.column("quat_x");
  const auto& qy = t.column("quat_y");
  const auto& qz = t.column("quat_z");
  const auto& sx = t.column("scale_x");
  const auto& sy = t.column("scale_y");
  const auto& sz = t.column("scale_z");
  const auto& op = t.column("opacity");
  const auto& r = t.column("r");
  const auto& g = t.column("g");
  const auto& b = t.column("b");
  std::vector<const std::vector<double>*> seg;
  for (int c = 0; c < k; ++c) seg.push_back(&t.column("seg_logit_" + std::to_string(c)));

  std::vector<PlanarGaussian> out(t.rows());
  for (std::size_t i = 0; i < t.rows(); ++i) {
    PlanarGaussian& p = out[i];
    p.center = {x[i], y[i], z[i]};
    p.orientation = Quaterniond(qw[i], qx[i], qy[i], qz[i]);
    double qn = p.orientation.norm();
    if (qn > 0.0 && std::isfinite(qn)) p.orientation.coeffs() /= qn;
    p.scale = {sx[i], sy[i], sz[i]};
    p.opacity_logit = op[i];
    p.color = {r[i], g[i], b[i]};
    p.seg_logits.resize(k);
    for (int c = 0; c < k; ++c) p.seg_logits[c] = (*seg[c])[i];
  }
  return out;
}

void save_scene(const ArticulatedScene& scene, const fs::path& json_path) {
  validate(scene);
  fs::path ply = json_path;
  ply.replace_extension(".ply");
  json j;
  j["format"] = "artikin-scene";
  j["version"] = 1;
  j["k"] = scene.k;
  j["temperature"] = scene.temperature;
  j["gaussians"] = ply.filename().string();
  j["joints"] = json::array();
  for (const auto& jp : scene.joints)
    j["joints"].push_back({{"theta", jp.theta},
                           {"axis", vec_json(jp.axis)},
                           {"pivot", vec_json(jp.pivot)},
                           {"translation", vec_json(jp.translation)}});
  json pm;
  pm["centers"] = json::array();
  pm["orientations"] = json::array();
  pm["scales"] = json::array();
  for (int p = 0; p < scene.part_model.size(); ++p) {
    pm["centers"].push_back(vec_json(scene.part_model.centers[p]));
    const Matrix3d& v = scene.part_model.orientations[p];
    json m = json::array();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m.push_back(v(r, c));
    pm["orientations"].push_back(m);
    pm["scales"].push_back(vec_json(scene.part_model.scales[p]));
  }
  j["part_model"] = pm;
  if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
  save_gaussians(ply, scene.gaussians);
  write_json(json_path, j);
}

ArticulatedScene load_scene(const fs::path& json_path) {
  json j = read_json(json_path);
  ArticulatedScene s;
  s.k = get<int>(j, "k", "scene");
  s.temperature = j.value("temperature", 1.0);
  auto joints = get<json>(j, "joints", "scene");
  if (!joints.is_array()) throw ParseError("scene.joints: expected a list");
  for (std::size_t i = 0; i < joints.size(); ++i) {
    std::string p = "joints[" + std::to_string(i) + "]";
    JointParams jp;
    jp.theta = get<double>(joints[i], "theta", p);
    jp.axis = get_vec(joints[i], "axis", p);
    jp.pivot = get_vec(joints[i], "pivot", p);
    jp.translation = get_vec(joints[i], "translation", p);
    double n = jp.axis.norm();
    if (n > 0.0 && std::isfinite(n)) jp.axis /= n;
    s.joints.push_back(jp);
  }
  auto pm = get<json>(j, "part_model", "scene");
  auto centers = get<json>(pm, "centers", "part_model");
  auto orients = get<json>(pm, "orientations", "part_model");
  auto scales = get<json>(pm, "scales", "part_model");
  if (centers.size() != orients.size() || centers.size() != scales.size())
    throw InvariantError("part_model", "centers/orientations/scales differ in length");
  for (std::size_t p = 0; p < centers.size(); ++p) {
    std::string path = "part_model[" + std::to_string(p) + "]";
    auto c = centers[p].get<std::vector<double>>();
    auto sc = scales[p].get<std::vector<double>>();
    if (c.size() != 3 || sc.size() != 3) throw ParseError(path + ": expected 3-vectors");
    s.part_model.centers.emplace_back(c[0], c[1], c[2]);
    s.part_model.orientations.push_back(get_mat(orients[p], path + ".orientation"));
    s.part_model.scales.emplace_back(sc[0], sc[1], sc[2]);
  }
  fs::path ply = json_path.parent_path() / get<std::string>(j, "gaussians", "scene");
  s.gaussians = load_gaussians(ply);
  validate(s);
  return s;
}

json camera_to_json(const Camera& c) {
  json K = json::array(), pose = json::array();
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) K.push_back(c.K(r, col));
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) pose.push_back(c.world_to_camera.linear()(r, col));
    pose.push_back(c.world_to_camera.translation()[r]);
  }
  return {{"K", K}, {"pose", pose}, {"width", c.width}, {"height", c.height}};
}

Camera camera_from_json(const json& j, const std::string& path) {
  auto K = get<std::vector<double>>(j, "K", path);
  auto pose = get<std::vector<double>>(j, "pose", path);
  if (K.size() != 9) throw ParseError(path + ".K: expected 9 numbers");
  if (pose.size() != 12) throw ParseError(path + ".pose: expected 12 numbers");
  Camera c;
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 3; ++col) c.K(r, col) = K[3 * r + col];
  Matrix3d rot;
  Vector3d tr;
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) rot(r, col) = pose[4 * r + col];
    tr[r] = pose[4 * r + 3];
  }
  c.world_to_camera.linear() = rot;
  c.world_to_camera.translation() = tr;
  c.width = get<int>(j, "width", path);
  c.height = get<int>(j, "height", path);
  validate(c, path);
  return c;
}

std::vector<Camera> load_cameras(const fs::path& path) {
  json j = read_json(path);
  if (!j.is_array()) throw ParseError(path.string() + ": expected a list of cameras");
  std::vector<Camera> cams;
  for (std::size_t i = 0; i < j.size(); ++i)
    cams.push_back(camera_from_json(j[i], "cameras[" + std::to_string(i) + "]"));
  return cams;
}

void save_cameras(const fs::path& path, const std::vector<Camera>& cams) {
  json j = json::array();
  for (const auto& c : cams) j.push_back(camera_to_json(c));
  write_json(path, j);
}

OrientedPoints load_point_cloud(const fs::path& path) {
  PlyTable t = read_ply(path);
  OrientedPoints pc;
  const auto &x = t.column("x"), &y = t.column("y"), &z = t.column("z");
  const auto &nx = t.column("nx"), &ny = t.column("ny"), &nz = t.column("nz");
  for (std::size_t i = 0; i < t.rows(); ++i) {
    pc.points.emplace_back(x[i], y[i], z[i]);
    pc.normals.push_back(Vector3d(nx[i], ny[i], nz[i]).normalized());
  }
  return pc;
}

void save_point_cloud(const fs::path& path, const OrientedPoints& pc) {
  PlyTable t;
  const char* names[6] = {"x", "y", "z", "nx", "ny", "nz"};
  for (int c = 0; c < 6; ++c) {
    std::vector<double> v(pc.points.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      v[i] = c < 3 ? pc.points[i][c] : pc.normals[i][c - 3];
    t.add(names[c], std::move(v));
  }
  write_ply(path, t);
}

void save_labeled_points(const fs::path& path, const std::vector<Vector3d>& points,
                         const std::vector<int>& labels) {
  PlyTable t;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> v(points.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = points[i][c];
    t.add(c == 0 ? "x" : c == 1 ? "y" : "z", std::move(v));
  }
  t.add("part", std::vector<double>(labels.begin(), labels.end()));
  write_ply(path, t);
}

}  // namespace artikin
