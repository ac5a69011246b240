#include "artikin/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "artikin/errors.hpp"
#include "artikin/so3.hpp"

namespace artikin {

std::string to_string(JointKind kind) {
  switch (kind) {
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Screw: return "screw";
  }
  return "revolute";
}

JointKind joint_kind_from_string(const std::string& s) {
  if (s == "revolute") return JointKind::Revolute;
  if (s == "prismatic") return JointKind::Prismatic;
  if (s == "screw") return JointKind::Screw;
  throw ParseError("unknown joint kind '" + s + "'");
}

RigidTransform GroundTruthJoint::motion() const {
  RigidTransform tf;
  tf.rotation = so3::exp(axis.normalized() * rotation_deg * kPi / 180.0);
  tf.translation = pivot - tf.rotation * pivot + translation;
  return tf;
}

void GroundTruth::validate() const {
  for (std::size_t j = 0; j < joints.size(); ++j) {
    const auto& g = joints[j];
    const std::string path = "joints[" + std::to_string(j) + "]";
    if (std::abs(g.axis.norm() - 1.0) > kUnitTolerance)
      throw InvariantError(path + ".axis", "axis must be unit length");
    if (g.kind == JointKind::Revolute && !g.translation.isZero(0.0))
      throw InvariantError(path + ".translation", "revolute joint with translation");
    if (g.kind == JointKind::Prismatic && g.rotation_deg != 0.0)
      throw InvariantError(path + ".rotation_deg", "prismatic joint with rotation");
  }
}

namespace {

nlohmann::json vec_json(const Vector3d& v) { return {v.x(), v.y(), v.z()}; }

Vector3d vec_from(const nlohmann::json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 3) throw ParseError(path + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

nlohmann::json GroundTruth::to_json() const {
  nlohmann::json js = nlohmann::json::array();
  for (const auto& g : joints)
    js.push_back({{"kind", to_string(g.kind)},
                  {"axis", vec_json(g.axis)},
                  {"pivot", vec_json(g.pivot)},
                  {"rotation_deg", g.rotation_deg},
                  {"translation", vec_json(g.translation)}});
  return {{"joints", js}, {"labels", labels}};
}

GroundTruth GroundTruth::from_json(const nlohmann::json& j) {
  GroundTruth gt;
  try {
    for (std::size_t i = 0; i < j.at("joints").size(); ++i) {
      const auto& e = j.at("joints")[i];
      const std::string path = "joints[" + std::to_string(i) + "]";
      GroundTruthJoint g;
      g.kind = joint_kind_from_string(e.at("kind").get<std::string>());
      g.axis = vec_from(e.at("axis"), path + ".axis");
      g.pivot = vec_from(e.at("pivot"), path + ".pivot");
      g.rotation_deg = e.at("rotation_deg").get<double>();
      g.translation = vec_from(e.at("translation"), path + ".translation");
      gt.joints.push_back(g);
    }
    gt.labels = j.at("labels").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("ground truth: ") + e.what());
  }
  gt.validate();
  return gt;
}

namespace {

int kind_parts(const std::string& kind) {
  if (kind == "hinge" || kind == "drawer" || kind == "screw") return 2;
  if (kind == "cabinet") return 4;
  throw ParseError("unknown scene kind '" + kind + "' (expected hinge, drawer, screw or cabinet)");
}

}  // namespace

SceneSpec SceneSpec::from_json(const nlohmann::json& j) {
  SceneSpec s;
  try {
    s.kind = j.value("kind", s.kind);
    s.k = j.value("k", kind_parts(s.kind));
    s.theta_total_deg = j.value("theta_total", s.theta_total_deg);
    s.translation = j.value("translation", s.translation);
    s.noise = j.value("noise", s.noise);
    s.n_gaussians = j.value("n_gaussians", s.n_gaussians);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scene spec: ") + e.what());
  }
  return s;
}

nlohmann::json SceneSpec::to_json() const {
  return {{"kind", kind},         {"k", k},         {"theta_total", theta_total_deg},
          {"translation", translation}, {"noise", noise}, {"n_gaussians", n_gaussians},
          {"seed", seed}};
}

namespace {

/// Surface primitive with a part label.
struct Patch {
  enum Type { Rect, Cylinder, Disk } type = Rect;
  Vector3d origin = Vector3d::Zero();  // rect corner, cylinder base center, disk center
  Vector3d u = Vector3d::Zero(), v = Vector3d::Zero();  // rect edges
  Vector3d normal = Vector3d::UnitZ();  // rect / disk normal, cylinder axis
  double radius = 0.0, height = 0.0;
  int label = 0;

  double area() const {
    switch (type) {
      case Rect: return u.cross(v).norm();
      case Cylinder: return 2.0 * kPi * radius * height;
      case Disk: return kPi * radius * radius;
    }
    return 0.0;
  }
};

struct Builder {
  std::vector<Patch> patches;

  /// Axis-aligned rectangle; `out` is the normal direction, the other two
  /// axes span [lo, hi].
  void rect(const Vector3d& lo, const Vector3d& hi, int axis, double sign, int label) {
    Patch p;
    p.type = Patch::Rect;
    const int a = (axis + 1) % 3, b = (axis + 2) % 3;
    p.origin = lo;
    p.origin[axis] = sign > 0 ? hi[axis] : lo[axis];
    p.u = Vector3d::Zero();
    p.v = Vector3d::Zero();
    p.u[a] = hi[a] - lo[a];
    p.v[b] = hi[b] - lo[b];
    p.normal = Vector3d::Zero();
    p.normal[axis] = sign;
    p.label = label;
    patches.push_back(p);
  }

  /// Box faces; `skip` lists faces to leave open as (axis, sign) codes
  /// 0..5 = -x, +x, -y, +y, -z, +z.
  void box(const Vector3d& lo, const Vector3d& hi, int label, std::vector<int> skip = {}) {
    for (int f = 0; f < 6; ++f) {
      if (std::find(skip.begin(), skip.end(), f) != skip.end()) continue;
      rect(lo, hi, f / 2, f % 2 == 0 ? -1.0 : 1.0, label);
    }
  }

  void panel(const Vector3d& lo, const Vector3d& hi, int axis, double sign, int label) {
    rect(lo, hi, axis, sign, label);
  }

  void cylinder(const Vector3d& base, double r, double h, int label) {
    Patch p;
    p.type = Patch::Cylinder;
    p.origin = base;
    p.normal = Vector3d::UnitZ();
    p.radius = r;
    p.height = h;
    p.label = label;
    patches.push_back(p);
  }

  void disk(const Vector3d& c, double r, int label) {
    Patch p;
    p.type = Patch::Disk;
    p.origin = c;
    p.normal = Vector3d::UnitZ();
    p.radius = r;
    p.label = label;
    patches.push_back(p);
  }
};

const Vector3d kPalette[] = {{0.80, 0.75, 0.65}, {0.30, 0.50, 0.80},
                             {0.80, 0.35, 0.30}, {0.35, 0.70, 0.40}};

Vector3d texture(const Vector3d& p, int label) {
  double t = 0.10 * std::sin(12.0 * p.x()) * std::sin(12.0 * p.z()) + 0.05 * std::sin(9.0 * p.y());
  return (kPalette[label % 4] + Vector3d::Constant(t)).cwiseMax(0.0).cwiseMin(1.0);
}

void frame_box(Builder& b, double half_w, int label) {
  // Cabinet carcass open at the front (y = 0).
  b.box({-half_w, 0.0, 0.0}, {half_w, 0.4, 1.0}, label, {2});
}

}  // namespace

SynthScene make_scene(const SceneSpec& spec) {
  const int expected = kind_parts(spec.kind);
  if (spec.k != expected)
    throw ParseError("scene kind '" + spec.kind + "' needs k = " + std::to_string(expected));
  if (spec.n_gaussians < 200) throw ParseError("n_gaussians must be at least 200");
  if (spec.noise < 0.0) throw ParseError("noise must be non-negative");

  Builder b;
  GroundTruth gt;
  const double th = spec.theta_total_deg;
  if (spec.kind == "hinge") {
    frame_box(b, 0.4, 0);
    b.panel({-0.4, -0.02, 0.0}, {0.4, -0.02, 1.0}, 1, -1.0, 1);
    gt.joints.push_back({JointKind::Revolute, -Vector3d::UnitZ(), {-0.4, -0.02, 0.5}, th,
                         Vector3d::Zero()});
  } else if (spec.kind == "drawer") {
    frame_box(b, 0.4, 0);
    b.box({-0.36, 0.0, 0.03}, {0.36, 0.36, 0.30}, 1, {2, 5});
    b.panel({-0.39, -0.02, 0.01}, {0.39, -0.02, 0.33}, 1, -1.0, 1);
    gt.joints.push_back({JointKind::Prismatic, -Vector3d::UnitY(), Vector3d::Zero(), 0.0,
                         Vector3d(0.0, -spec.translation, 0.0)});
  } else if (spec.kind == "screw") {
    b.box({-0.3, -0.3, 0.0}, {0.3, 0.3, 0.5}, 0);
    b.cylinder({0.0, 0.0, 0.5}, 0.10, 0.15, 0);
    b.cylinder({0.0, 0.0, 0.55}, 0.16, 0.15, 1);
    b.disk({0.0, 0.0, 0.70}, 0.16, 1);
    b.box({0.16, -0.03, 0.60}, {0.50, 0.03, 0.66}, 1, {0});
    gt.joints.push_back({JointKind::Screw, Vector3d::UnitZ(), Vector3d::Zero(), th,
                         Vector3d(0.0, 0.0, spec.translation)});
  } else {
    frame_box(b, 0.6, 0);
    b.panel({-0.6, 0.0, 0.36}, {0.6, 0.4, 0.36}, 2, 1.0, 0);
    b.panel({-0.6, -0.02, 0.38}, {-0.01, -0.02, 1.0}, 1, -1.0, 1);
    b.panel({0.01, -0.02, 0.38}, {0.6, -0.02, 1.0}, 1, -1.0, 2);
    b.box({-0.55, 0.0, 0.03}, {0.55, 0.37, 0.31}, 3, {2, 5});
    b.panel({-0.58, -0.02, 0.02}, {0.58, -0.02, 0.33}, 1, -1.0, 3);
    gt.joints.push_back({JointKind::Revolute, -Vector3d::UnitZ(), {-0.6, -0.02, 0.7}, th,
                         Vector3d::Zero()});
    gt.joints.push_back({JointKind::Revolute, Vector3d::UnitZ(), {0.6, -0.02, 0.7}, 0.75 * th,
                         Vector3d::Zero()});
    gt.joints.push_back({JointKind::Prismatic, -Vector3d::UnitY(), Vector3d::Zero(), 0.0,
                         Vector3d(0.0, -spec.translation, 0.0)});
  }
  gt.validate();

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  double total = 0.0;
  for (const auto& p : b.patches) total += p.area();
  std::vector<int> counts;
  int assigned = 0;
  for (std::size_t i = 0; i < b.patches.size(); ++i) {
    int c = static_cast<int>(std::lround(spec.n_gaussians * b.patches[i].area() / total));
    if (i + 1 == b.patches.size()) c = spec.n_gaussians - assigned;
    c = std::max(c, 0);
    counts.push_back(c);
    assigned += c;
  }

  SynthScene out;
  OrientedPoints base;
  for (std::size_t i = 0; i < b.patches.size(); ++i) {
    const Patch& p = b.patches[i];
    for (int s = 0; s < counts[i]; ++s) {
      Vector3d pt, n;
      if (p.type == Patch::Rect) {
        pt = p.origin + unit(rng) * p.u + unit(rng) * p.v;
        n = p.normal;
      } else if (p.type == Patch::Cylinder) {
        double a = 2.0 * kPi * unit(rng);
        n = Vector3d(std::cos(a), std::sin(a), 0.0);
        pt = p.origin + p.radius * n + unit(rng) * p.height * Vector3d::UnitZ();
      } else {
        double a = 2.0 * kPi * unit(rng), r = p.radius * std::sqrt(unit(rng));
        pt = p.origin + Vector3d(r * std::cos(a), r * std::sin(a), 0.0);
        n = p.normal;
      }
      base.points.push_back(pt);
      base.normals.push_back(n);
      gt.labels.push_back(p.label);
      out.colors.push_back(texture(pt, p.label));
    }
  }

  out.cloud_t0 = base;
  out.cloud_t1 = base;
  for (std::size_t i = 0; i < base.points.size(); ++i) {
    const int label = gt.labels[i];
    if (label == 0) continue;
    RigidTransform m = gt.joints[label - 1].motion();
    out.cloud_t1.points[i] = m.apply(base.points[i]);
    out.cloud_t1.normals[i] = m.rotation * base.normals[i];
  }
  if (spec.noise > 0.0) {
    for (auto* cloud : {&out.cloud_t0, &out.cloud_t1})
      for (auto& p : cloud->points)
        p += spec.noise * Vector3d(gauss(rng), gauss(rng), gauss(rng));
  }
  out.input.gaussians_t0 = fit_state_gaussians(out.cloud_t0, out.colors);
  out.input.gaussians_t1 = fit_state_gaussians(out.cloud_t1, out.colors);
  out.truth = gt;
  return out;
}

}  // namespace artikin
