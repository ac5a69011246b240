#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>

#include "artikin/errors.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/mesh.hpp"
#include "artikin/segmentation.hpp"
#include "support.hpp"

using namespace artikin;
using testing::Gen;

namespace {

/// Depth image of the world plane z = 0 seen from `cam`.
DepthView plane_view(const Camera& cam) {
  DepthView v;
  v.camera = cam;
  v.depth = ImageF(cam.width, cam.height, 0.0);
  const Eigen::Isometry3d c2w = cam.world_to_camera.inverse();
  const Vector3d c = c2w.translation();
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      Vector3d d = c2w.linear() * pixel_ray(cam, x, y);
      double s = -c.z() / d.z();
      if (s > 0.0) v.depth(x, y) = s;
    }
  return v;
}

/// Interpolated zero crossing of the sdf along the z column at (i, j).
std::optional<double> column_crossing(const TsdfGrid& g, int i, int j) {
  for (int k = 0; k + 1 < g.spec().dims.z(); ++k) {
    if (g.weight(i, j, k) <= 0.0 || g.weight(i, j, k + 1) <= 0.0) continue;
    double a = g.sdf(i, j, k), b = g.sdf(i, j, k + 1);
    if ((a > 0.0) != (b > 0.0)) {
      double s = a / (a - b);
      return g.position(i, j, k).z() + s * g.spec().voxel;
    }
  }
  return std::nullopt;
}

/// Square plate of splats in the plane through `o` spanned by u and v.
void plate(std::vector<PlanarGaussian>& out, const Vector3d& o, const Vector3d& u,
           const Vector3d& v, int n, double size, int part, int k) {
  const Vector3d normal = u.cross(v).normalized();
  Matrix3d r;
  r << u.normalized(), v.normalized(), normal;
  const double step = size / n;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      PlanarGaussian g;
      g.center = o + u.normalized() * (a + 0.5) * step + v.normalized() * (b + 0.5) * step;
      g.orientation = Quaterniond(r);
      g.scale = Vector3d(step, step, step / 20.0);
      g.set_opacity(0.95);
      g.seg_logits = VectorXd::Zero(k);
      g.seg_logits[part] = 30.0;
      out.push_back(g);
    }
}

/// Static floor plate and a door plate hinged along the y axis.
ArticulatedScene hinge_scene(double theta) {
  ArticulatedScene s;
  s.k = 2;
  s.temperature = 0.25;
  s.part_model = PartModel::identity(2);
  plate(s.gaussians, Vector3d(-0.6, -0.3, 0), Vector3d::UnitX(), Vector3d::UnitY(), 24, 0.6, 0, 2);
  plate(s.gaussians, Vector3d(0.0, -0.3, 0), Vector3d(1, 0, 1), Vector3d::UnitY(), 24, 0.6, 1, 2);
  JointParams j;
  j.theta = theta;
  j.axis = Vector3d::UnitY();
  s.joints = {JointParams::identity(), j};
  return s;
}

}  // namespace

TEST_CASE("part selection") {
  Gen gen(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = gen.integer(1, 4);
    ArticulatedScene s = gen.scene(k, 30);
    std::vector<int> seen(s.gaussians.size(), 0);
    auto labels = argmax_labels(scene_masks(s));
    for (int j = 0; j < k; ++j)
      for (int i : select_part(s, j)) {
        ++seen[i];
        CHECK(labels[i] == j);
      }
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    CHECK_THROWS_AS(select_part(s, k), ContractError);
    CHECK_THROWS_AS(select_part(s, -1), ContractError);
  }
  // Identical part frames and logits tie; the lowest part wins.
  ArticulatedScene tie;
  tie.k = 3;
  tie.joints.assign(3, JointParams::identity());
  tie.part_model = PartModel::identity(3);
  PlanarGaussian g;
  g.seg_logits = VectorXd::Zero(3);
  tie.gaussians = {g, g};
  CHECK(select_part(tie, 0) == std::vector<int>{0, 1});
  CHECK(select_part(tie, 1).empty());
}

TEST_CASE("grid layout") {
  GridSpec g = GridSpec::covering(Vector3d(-1, 0, 2), Vector3d(1, 0.5, 3), 0.1, 0.2);
  CHECK((g.origin - Vector3d(-1.2, -0.2, 1.8)).norm() < 1e-12);
  for (int a = 0; a < 3; ++a)
    CHECK(g.origin[a] + g.voxel * (g.dims[a] - 1) >= (Vector3d(1, 0.5, 3)[a] + 0.2) - 1e-12);
  CHECK(g.trunc() == doctest::Approx(0.3));
  TsdfGrid t(g);
  CHECK(t.index(1, 2, 3) == (3u * g.dims.y() + 2) * g.dims.x() + 1);
  CHECK(t.weights().size() == static_cast<std::size_t>(g.dims.prod()));
}

TEST_CASE("fusing a plane") {
  GridSpec spec = GridSpec::covering(Vector3d(-0.4, -0.4, -0.4), Vector3d(0.4, 0.4, 0.4), 0.05, 0.0);
  const double voxel = spec.voxel;
  Camera front = Camera::look_at(Vector3d(0, 0, -2), Vector3d::Zero(), Vector3d::UnitY(), 50, 96, 96);
  Camera oblique =
      Camera::look_at(Vector3d(1.2, 0.3, -1.6), Vector3d::Zero(), Vector3d::UnitY(), 50, 96, 96);

  SUBCASE("single view zero crossing") {
    TsdfGrid g = fuse({plane_view(front)}, spec);
    int columns = 0;
    for (int i = 0; i < spec.dims.x(); ++i)
      for (int j = 0; j < spec.dims.y(); ++j)
        if (auto z = column_crossing(g, i, j)) {
          ++columns;
          CHECK(std::abs(*z) <= voxel / 2);
        }
    CHECK(columns > spec.dims.x() * spec.dims.y() / 2);
    // In front of the surface the distance is positive.
    const int ci = spec.dims.x() / 2, cj = spec.dims.y() / 2;
    for (int k = 0; k < spec.dims.z(); ++k) {
      double z = g.position(ci, cj, k).z();
      if (g.weight(ci, cj, k) > 0.0 && std::abs(z) > 1e-9) CHECK((g.sdf(ci, cj, k) > 0.0) == (z < 0.0));
    }
  }
  SUBCASE("empty depth carries no weight") {
    DepthView v = plane_view(front);
    std::fill(v.depth.data.begin(), v.depth.data.end(), 0.0);
    TsdfGrid g = fuse({v}, spec);
    CHECK(std::all_of(g.weights().begin(), g.weights().end(), [](double w) { return w == 0.0; }));
  }
  SUBCASE("two views agree") {
    TsdfGrid g = fuse({plane_view(front), plane_view(oblique)}, spec);
    int checked = 0;
    for (int i = spec.dims.x() / 4; i < 3 * spec.dims.x() / 4; ++i)
      for (int j = spec.dims.y() / 4; j < 3 * spec.dims.y() / 4; ++j)
        if (auto z = column_crossing(g, i, j)) {
          ++checked;
          CHECK(std::abs(*z) <= voxel / 4);
        }
    CHECK(checked > 0);
  }
  SUBCASE("view order does not matter") {
    std::vector<DepthView> views = {plane_view(front), plane_view(oblique)};
    Camera third = Camera::look_at(Vector3d(-0.5, -1, -1.5), Vector3d::Zero(), Vector3d::UnitY(),
                                   40, 64, 80);
    views.push_back(plane_view(third));
    TsdfGrid a = fuse(views, spec);
    std::reverse(views.begin(), views.end());
    TsdfGrid b = fuse(views, spec);
    std::swap(views[0], views[1]);
    TsdfGrid c = fuse(views, spec);
    CHECK(a.sdf_values() == b.sdf_values());
    CHECK(a.sdf_values() == c.sdf_values());
    CHECK(a.weights() == b.weights());
  }
}

TEST_CASE("marching cubes") {
  SUBCASE("sphere") {
    const double r = 0.5, voxel = 0.05;
    GridSpec spec = GridSpec::covering(Vector3d::Constant(-r), Vector3d::Constant(r), voxel, 0.2);
    spec.truncation = 1.0;
    TsdfGrid g(spec);
    const Vector3d c(0.013, -0.007, 0.021);
    g.assign([&](const Vector3d& p) { return (p - c).norm() - r; });
    TriangleMesh m = marching_cubes(g);
    REQUIRE_FALSE(m.empty());
    CHECK_NOTHROW(m.validate());
    for (const auto& v : m.vertices) CHECK(std::abs((v - c).norm() - r) <= 1.5 * voxel);
    CHECK(m.area() == doctest::Approx(4 * kPi * r * r).epsilon(0.03));
    // Watertight: every edge is shared by exactly two triangles.
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : m.triangles)
      for (int e = 0; e < 3; ++e) {
        int a = t[e], b = t[(e + 1) % 3];
        ++edges[{std::min(a, b), std::max(a, b)}];
      }
    CHECK(std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second == 2; }));
    // Counter-clockwise seen from outside: normals point away from the center.
    int outward = 0;
    for (const auto& t : m.triangles) {
      Vector3d a = m.vertices[t[0]], b = m.vertices[t[1]], d = m.vertices[t[2]];
      Vector3d n = (b - a).cross(d - a);
      if (n.dot((a + b + d) / 3.0 - c) > 0.0) ++outward;
    }
    CHECK(outward == static_cast<int>(m.triangles.size()));
  }
  SUBCASE("uniform sign gives no surface") {
    GridSpec spec = GridSpec::covering(Vector3d::Zero(), Vector3d::Ones(), 0.1, 0.0);
    TsdfGrid g(spec);
    g.assign([](const Vector3d&) { return 0.2; });
    CHECK(marching_cubes(g).empty());
    g.assign([](const Vector3d&) { return -0.2; });
    CHECK(marching_cubes(g).empty());
    CHECK(marching_cubes(TsdfGrid(spec)).empty());  // no weight anywhere
  }
  SUBCASE("box") {
    const double voxel = 0.04;
    const Vector3d lo(-0.3, -0.2, -0.1), hi(0.25, 0.3, 0.15);
    GridSpec spec = GridSpec::covering(lo, hi, voxel, 0.12);
    TsdfGrid g(spec);
    g.assign([&](const Vector3d& p) {
      Vector3d q = (p - (lo + hi) / 2).cwiseAbs() - (hi - lo) / 2;
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
    });
    TriangleMesh m = marching_cubes(g);
    Vector3d mlo = Vector3d::Constant(1e9), mhi = Vector3d::Constant(-1e9);
    for (const auto& v : m.vertices) mlo = mlo.cwiseMin(v), mhi = mhi.cwiseMax(v);
    CHECK((mlo - lo).cwiseAbs().maxCoeff() <= voxel);
    CHECK((mhi - hi).cwiseAbs().maxCoeff() <= voxel);
  }
}

TEST_CASE("camera rig") {
  auto rig = camera_rig(Vector3d(1, 2, 3), 0.5, 32, 24);
  REQUIRE(rig.size() == 26);
  for (const auto& c : rig) {
    CHECK((c.center() - Vector3d(1, 2, 3)).norm() == doctest::Approx(1.25));
    Vector3d p = c.world_to_camera * Vector3d(1, 2, 3);
    CHECK(std::abs(p.x()) < 1e-9);
    CHECK(std::abs(p.y()) < 1e-9);
    CHECK(c.width == 32);
    CHECK(c.height == 24);
  }
}

TEST_CASE("part mesh extraction") {
  MeshOptions opts;
  opts.voxel = 0.03;
  opts.width = opts.height = 96;
  const double theta = kPi / 6;
  ArticulatedScene s = hinge_scene(theta);
  auto rest_cams = camera_rig(Vector3d(0, 0, 0.2), 0.7, opts.width, opts.height);

  SUBCASE("canonical state equals the unposed scene") {
    ArticulatedScene still = s;
    still.joints[1] = JointParams::identity();
    auto a = extract_part_meshes(s, 0.5, rest_cams, opts);
    auto b = extract_part_meshes(still, 0.5, rest_cams, opts);
    REQUIRE(a.parts.size() == 2);
    REQUIRE(b.parts.size() == 2);
    for (int p = 0; p < 2; ++p) {
      CHECK(a.parts[p].mesh.vertices == b.parts[p].mesh.vertices);
      CHECK(a.parts[p].mesh.triangles == b.parts[p].mesh.triangles);
    }
    CHECK(a.whole.vertices == b.whole.vertices);
  }
  SUBCASE("door follows the joint") {
    auto rest = extract_part_meshes(s, 0.5, rest_cams, opts);
    auto open = extract_part_meshes(s, 1.0, rest_cams, opts);
    REQUIRE(open.parts.size() == 2);
    const RigidTransform motion = joint_transform(s.joints[1], 1.0);
    auto door_rest = sample_surface(rest.parts[1].mesh, 3000, 1);
    for (auto& p : door_rest) p = motion.apply(p);
    auto door_open = sample_surface(open.parts[1].mesh, 3000, 2);
    CHECK(mean_surface_distance(door_rest, door_open) <= 2.0 * opts.voxel);
    // The static part does not move.
    auto base_rest = sample_surface(rest.parts[0].mesh, 3000, 3);
    auto base_open = sample_surface(open.parts[0].mesh, 3000, 4);
    CHECK(mean_surface_distance(base_rest, base_open) <= 2.0 * opts.voxel);
    CHECK(open.parts[0].part == 0);
    CHECK(open.parts[1].part == 1);
  }
  SUBCASE("parts without Gaussians are omitted") {
    ArticulatedScene three = s;
    three.k = 3;
    three.part_model = PartModel::identity(3);
    three.joints.push_back(JointParams::identity());
    for (auto& g : three.gaussians) {
      VectorXd l = VectorXd::Zero(3);
      l.head(2) = g.seg_logits;
      g.seg_logits = l;
    }
    auto m = extract_part_meshes(three, 0.5, rest_cams, opts);
    REQUIRE(m.parts.size() == 2);
    CHECK(m.parts[0].part == 0);
    CHECK(m.parts[1].part == 1);
  }
  SUBCASE("states outside the range are clamped") {
    auto a = extract_part_meshes(s, 1.7, rest_cams, opts);
    auto b = extract_part_meshes(s, 1.0, rest_cams, opts);
    CHECK(a.whole.vertices == b.whole.vertices);
  }
}

TEST_CASE("surface sampling and distance") {
  TriangleMesh m;
  m.vertices = {Vector3d(0, 0, 0), Vector3d(1, 0, 0), Vector3d(1, 1, 0), Vector3d(0, 1, 0)};
  m.triangles = {Vector3i(0, 1, 2), Vector3i(0, 2, 3)};
  CHECK(m.area() == doctest::Approx(1.0));
  auto pts = sample_surface(m, 4000, 9);
  REQUIRE(pts.size() == 4000);
  Vector3d mean = Vector3d::Zero();
  for (const auto& p : pts) {
    CHECK(p.z() == 0.0);
    CHECK(p.x() >= -1e-12);
    CHECK(p.x() <= 1 + 1e-12);
    mean += p;
  }
  mean /= pts.size();
  CHECK((mean - Vector3d(0.5, 0.5, 0)).norm() < 0.03);
  CHECK(sample_surface(m, 100, 9) == sample_surface(m, 100, 9));

  std::vector<Vector3d> a = {Vector3d(0, 0, 0)}, b = {Vector3d(0, 0, 0.3), Vector3d(0, 0, 1)};
  // a -> b: 0.3; b -> a: (0.3 + 1) / 2.
  CHECK(mean_surface_distance(a, b) == doctest::Approx((0.3 + 0.65) / 2));
  CHECK(mean_surface_distance(a, b) == mean_surface_distance(b, a));
}

TEST_CASE("OBJ files") {
  testing::TempDir dir("obj");
  TriangleMesh m;
  Gen gen(3);
  for (int i = 0; i < 30; ++i) m.vertices.push_back(gen.vec());
  for (int i = 0; i < 20; ++i)
    m.triangles.emplace_back(gen.integer(0, 29), gen.integer(0, 29), gen.integer(0, 29));
  write_obj(dir / "m.obj", m);
  TriangleMesh back = read_obj(dir / "m.obj");
  CHECK(back.triangles == m.triangles);
  REQUIRE(back.vertices.size() == m.vertices.size());
  for (std::size_t i = 0; i < m.vertices.size(); ++i)
    CHECK((back.vertices[i] - m.vertices[i]).norm() <= 1e-9);

  CHECK_THROWS_AS(read_obj(dir / "missing.obj"), IoError);
  {
    std::ofstream bad(dir / "bad.obj");
    bad << "v 0 0 0\nf 1 2 3\n";
  }
  CHECK_THROWS_AS(read_obj(dir / "bad.obj"), InvariantError);
  {
    std::ofstream bad(dir / "garbled.obj");
    bad << "v 0 zero 0\n";
  }
  CHECK_THROWS_AS(read_obj(dir / "garbled.obj"), ParseError);
}

TEST_CASE("mesh file names") {
  CHECK(format_state(0.0) == "0");
  CHECK(format_state(1.0) == "1");
  CHECK(format_state(0.5) == "0.5");
  CHECK(format_state(0.25) == "0.25");
  CHECK(std::abs(std::stod(format_state(1.0 / 3.0)) - 1.0 / 3.0) <= 1e-6);
  CHECK(part_mesh_name(2, 0.5) == "part_2_t0.5.obj");
  CHECK(whole_mesh_name(1.0) == "whole_t1.obj");
}
