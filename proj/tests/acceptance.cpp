// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Fits use FitConfig::geometry_profile();
// the same scenes fitted with the library defaults are reported on INFO lines.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "artikin/cluster.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/log.hpp"
#include "artikin/losses.hpp"
#include "artikin/mesh.hpp"
#include "artikin/metrics.hpp"
#include "artikin/optimizer.hpp"
#include "artikin/parallel.hpp"
#include "artikin/renderer.hpp"
#include "artikin/segmentation.hpp"
#include "artikin/spatial.hpp"
#include "artikin/synth.hpp"
#include "support.hpp"

using namespace artikin;
using testing::Gen;
namespace fs = std::filesystem;

namespace {

constexpr int kIterations = 3000;
int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << fmt::format("[{}] {:>2} {}: {}", pass ? "PASS" : "FAIL", id, name, detail)
            << std::endl;
}

void info(const std::string& text) { std::cout << "[INFO]    " << text << std::endl; }

/// Runs a criterion, turning an exception into a failure line.
void criterion(int id, const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("threw: ") + e.what());
  }
}

SceneSpec spec_of(const std::string& kind) {
  SceneSpec s;
  s.kind = kind;
  s.k = kind == "cabinet" ? 4 : 2;
  s.theta_total_deg = kind == "screw" ? 90.0 : 60.0;
  s.translation = kind == "screw" ? 0.1 : 0.3;
  s.n_gaussians = 2000;
  s.noise = 1e-3;
  return s;
}

struct Fitted {
  SynthScene synth;
  FitResult fit;
  MetricReport metrics;
  double seconds = 0.0;
};

Fitted fit_kind(const std::string& kind, const FitConfig& base) {
  Fitted f;
  f.synth = make_scene(spec_of(kind));
  FitConfig cfg = base;
  cfg.k = f.synth.truth.joints.size() + 1;
  cfg.iterations = kIterations;
  const auto start = std::chrono::steady_clock::now();
  f.fit = fit(f.synth.input, cfg);
  f.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  f.metrics = evaluate(f.fit.scene, f.synth.truth, &f.synth.cloud_t0.points);
  return f;
}

double label_score(const Fitted& f) {
  const auto labels = argmax_labels(scene_masks(f.fit.scene));
  const auto& canon = f.fit.init->canonical;
  std::vector<int> pred, truth;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (canon.source_t0[i] >= 0) {
      pred.push_back(labels[i]);
      truth.push_back(f.synth.truth.labels[canon.source_t0[i]]);
    }
  return label_agreement(pred, truth, f.fit.scene.k);
}

std::string joint_summary(const MetricReport& m) {
  std::string s;
  for (const auto& j : m.joints)
    s += fmt::format("[part {}: axis_ang {:.4f} deg, axis_pos {} cm, rot {:.4f} deg, trans {:.2e}] ",
                     j.gt_part, j.axis_ang,
                     j.axis_pos_cm ? fmt::format("{:.4f}", *j.axis_pos_cm) : std::string("-"),
                     j.motion.rot_deg, j.motion.trans);
  return s;
}

// Criteria ------------------------------------------------------------------

void revolute(const FitConfig& cfg) {
  set_max_threads(1);
  Fitted f = fit_kind("hinge", cfg);
  set_max_threads(0);
  const JointReport& j = f.metrics.joints.at(0);
  const bool pass = j.axis_ang <= 0.5 && j.axis_pos_cm && *j.axis_pos_cm <= 0.5 &&
                    j.motion.rot_deg <= 0.5 && j.motion.trans <= 5e-3 && f.seconds <= 180.0;
  report(1, "revolute recovery", pass,
         fmt::format("axis_ang {:.4f} deg (<= 0.5), axis_pos {:.4f} cm (<= 0.5), rot {:.4f} deg "
                     "(<= 0.5), trans {:.2e} (<= 5e-3), {} iterations single-threaded in {:.1f} s "
                     "(<= 180)",
                     j.axis_ang, j.axis_pos_cm.value_or(-1.0), j.motion.rot_deg, j.motion.trans,
                     kIterations, f.seconds));
}

void prismatic(const FitConfig& cfg) {
  Fitted f = fit_kind("drawer", cfg);
  const JointReport& j = f.metrics.joints.at(0);
  const bool pass =
      j.trans_dir_deg <= 1.0 && j.trans_mag_err <= 5e-3 && std::abs(j.theta_total_deg) <= 1.0;
  report(2, "prismatic recovery", pass,
         fmt::format("direction {:.4f} deg (<= 1), magnitude error {:.2e} (<= 5e-3), "
                     "|theta_total| {:.4f} deg (<= 1)",
                     j.trans_dir_deg, j.trans_mag_err, std::abs(j.theta_total_deg)));
}

void screw(const FitConfig& cfg) {
  Fitted f = fit_kind("screw", cfg);
  const JointReport& j = f.metrics.joints.at(0);
  const bool pass = j.axis_ang <= 1.0 && j.motion.rot_deg <= 1.0 && j.motion.trans <= 5e-3;
  report(3, "screw recovery", pass,
         fmt::format("axis_ang {:.4f} deg (<= 1), rot {:.4f} deg (<= 1), trans {:.2e} (<= 5e-3)",
                     j.axis_ang, j.motion.rot_deg, j.motion.trans));
}

void multi_part(const FitConfig& cfg) {
  Fitted f = fit_kind("cabinet", cfg);
  const double agree = label_score(f);
  double worst = 0.0;
  for (const auto& j : f.metrics.joints) worst = std::max(worst, j.axis_ang);
  const bool pass = agree >= 0.98 && worst <= 2.0 && f.metrics.joints.size() == 3;
  report(4, "multi-part recovery", pass,
         fmt::format("label agreement {:.4f} (>= 0.98), worst axis_ang {:.4f} deg (<= 2)", agree,
                     worst));
}

void default_config_info() {
  const FitConfig cfg;  // library defaults: temperature 1, vote weight 0.01
  for (const char* kind : {"hinge", "drawer", "screw", "cabinet"}) {
    Fitted f = fit_kind(kind, cfg);
    std::string extra;
    const JointReport& j = f.metrics.joints.at(0);
    if (j.kind == JointKind::Prismatic)
      extra = fmt::format("direction {:.4f} deg, magnitude error {:.2e}, ", j.trans_dir_deg,
                          j.trans_mag_err);
    info(fmt::format("default config, {}: {}{}label agreement {:.4f}", kind, extra,
                     joint_summary(f.metrics), label_score(f)));
  }
}

void unbiased_depth() {
  Gen gen(5);
  const Camera cam =
      Camera::look_at(Vector3d::Zero(), Vector3d::UnitZ(), -Vector3d::UnitY(), 50.0, 64, 64);
  double worst = 0.0;
  int covered = 0, poses_with_cover = 0;
  for (int pose = 0; pose < 20; ++pose) {
    Vector3d n = gen.unit();
    if (n.z() > 0.0) n = -n;
    if (n.z() > -0.3) n = (n + Vector3d(0, 0, -0.6)).normalized();  // keep the plane in view
    const Vector3d c(gen.uniform(-0.2, 0.2), gen.uniform(-0.2, 0.2), gen.uniform(1.5, 3.0));
    PlanarGaussian g;
    Matrix3d frame;
    const Vector3d u = n.unitOrthogonal();
    frame << u, n.cross(u), n;
    g.center = c;
    g.orientation = Quaterniond(frame);
    g.scale = Vector3d(1.5, 1.5, 1e-6);
    g.set_opacity(0.999);
    const RenderMaps maps = render_gaussians({g}, nullptr, cam);
    int here = 0;
    const Vector3d cc = cam.world_to_camera * c, nc = cam.world_to_camera.linear() * n;
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        if (!maps.depth_valid(x, y)) continue;
        const double expect = nc.dot(cc) / nc.dot(pixel_ray(cam, x, y));
        worst = std::max(worst, std::abs(maps.depth(x, y) - expect) / expect);
        ++here;
      }
    covered += here;
    poses_with_cover += here > 0;
  }
  report(5, "unbiased depth", worst <= 1e-6 && poses_with_cover == 20,
         fmt::format("worst relative depth error {:.2e} (<= 1e-6) over {} covered pixels, "
                     "{}/20 poses covered",
                     worst, covered, poses_with_cover));
}

void temporal_constraint() {
  const Camera cam =
      Camera::look_at(Vector3d(0, 0, -2), Vector3d::Zero(), Vector3d::UnitY(), 50, 48, 48);
  auto plane = [](const Vector3d& n, int part) {
    PlanarGaussian g;
    Matrix3d frame;
    const Vector3d u = n.unitOrthogonal();
    frame << u, n.cross(u), n;
    g.orientation = Quaterniond(frame);
    g.scale = Vector3d(1.0, 1.0, 1e-6);
    g.set_opacity(0.999);
    g.seg_logits = VectorXd::Zero(2);
    g.seg_logits[part] = 1e4;
    ArticulatedScene s;
    s.k = 2;
    s.joints = {JointParams::identity(), JointParams::identity()};
    s.part_model = PartModel::identity(2);
    s.gaussians = {g};
    return s;
  };
  double worst = 0.0;
  for (double deg : {1.0, 3.0, 5.0}) {
    ArticulatedScene s = plane(Vector3d(0, 0, -1), 1);
    s.joints[1].theta = deg * kPi / 180.0;
    s.joints[1].axis = Vector3d::UnitY();
    const Vector3d n_cam = cam.world_to_camera.linear() * Vector3d(0, 0, -1);
    const Vector3d a_cam = cam.world_to_camera.linear() * Vector3d::UnitY();
    // dN/dt at the canonical state for theta(t) = 2 (t - 1/2) theta.
    const Vector3d analytic = 2.0 * s.joints[1].theta * a_cam.cross(n_cam);
    for (double t0 : {0.0, 1.0}) {
      const NormalGradient g = grad_normal(s, cam, t0);
      for (std::size_t i = 0; i < g.grad.data.size(); ++i)
        if (g.valid.data[i])
          worst = std::max(worst, (g.grad.data[i] - analytic).norm() / analytic.norm());
    }
  }
  const ArticulatedScene still = plane(Vector3d(0.3, -0.2, -1).normalized(), 0);
  const ImageRGB image(48, 48, Vector3d::Constant(0.5));
  const double geo = std::max(l_geo(still, cam, 0.0, image), l_geo(still, cam, 1.0, image));
  report(6, "temporal constraint", worst <= 0.05 && geo <= 1e-3,
         fmt::format("worst normal-derivative error {:.2f}% (<= 5%) at 1/3/5 deg, "
                     "static-plane l_geo {:.2e} (<= 1e-3)",
                     100.0 * worst, geo));
}

void gradient_check() {
  Gen gen(7);
  ArticulatedScene s = gen.scene(2, 50);
  s.temperature = 1.0;
  ArticulatedScene target = s;
  target.joints[1].theta += 0.05;
  target.joints[1].translation += Vector3d(0.02, -0.01, 0.03);
  std::vector<StateObservation> obs(2);
  obs[0].t = 0.0;
  obs[1].t = 1.0;
  for (auto& o : obs) {
    o.gaussians = transform_scene(target, o.t);
    for (auto& g : *o.gaussians) g.center += gen.vec(-0.01, 0.01);
  }
  const LossWeights w;  // every geometry-mode term active
  LossContext ctx = make_loss_context(obs);
  BoundarySet b = detect_boundary(s, 6, 0.2);
  vote_regions(b, centers_of(s.gaussians), s.k, 0);
  const bool has_vote = !b.empty();
  ctx.boundary = b;
  const GradientResult a =
      gradients(s, obs, w, LossMode::Geometry, &ctx, nullptr, {GradientMode::Analytic, 1e-4});
  const GradientResult f = gradients(s, obs, w, LossMode::Geometry, &ctx, nullptr,
                                     {GradientMode::FiniteDifference, 1e-6});
  // Relative per coordinate, with an absolute floor for coordinates whose
  // gradient is at the level of the difference quotient's round-off.
  const double floor = 1e-8;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.grad.size(); ++i) {
    const double err = std::abs(a.grad[i] - f.grad[i]);
    const double denom = std::max({std::abs(a.grad[i]), std::abs(f.grad[i]), floor / 1e-4});
    worst = std::max(worst, err / denom);
  }
  report(7, "gradient correctness", worst <= 1e-4 && has_vote,
         fmt::format("worst relative error {:.2e} (<= 1e-4, absolute floor {:.0e}) over {} "
                     "coordinates; alignment, scale, center and vote terms active (vote "
                     "boundary {})",
                     worst, floor, a.grad.size(), has_vote ? "non-empty" : "EMPTY"));
}

void hungarian_oracle() {
  Gen gen(8);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const int n = gen.integer(1, 8);
    Eigen::MatrixXd c(n, n);
    // Integer costs keep every sum exact, so the comparison is exact.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) c(i, j) = gen.integer(trial % 2 == 0 ? 0 : -50, 50);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    double best = std::numeric_limits<double>::infinity();
    do best = std::min(best, assignment_cost(c, perm));
    while (std::next_permutation(perm.begin(), perm.end()));
    if (assignment_cost(c, hungarian_match(c)) != best) ++mismatches;
  }
  report(8, "Hungarian oracle", mismatches == 0,
         fmt::format("{} mismatches against brute force over 500 matrices, n <= 8 (exact)",
                     mismatches));
}

bool same_bits(const void* a, const void* b, std::size_t bytes) {
  return std::memcmp(a, b, bytes) == 0;
}

void canonical_identity() {
  Gen gen(9);
  int bad_pose = 0, bad_render = 0;
  const Camera cam =
      Camera::look_at(Vector3d(1, -1, -3), Vector3d::Zero(), Vector3d::UnitY(), 50, 40, 40);
  for (int trial = 0; trial < 20; ++trial) {
    ArticulatedScene s = gen.scene(gen.integer(1, 4), 100);
    const auto posed = transform_scene(s, 0.5);
    for (std::size_t i = 0; i < posed.size(); ++i) {
      const auto& p = posed[i];
      const auto& g = s.gaussians[i];
      if (!same_bits(p.center.data(), g.center.data(), sizeof(double) * 3) ||
          !same_bits(p.orientation.coeffs().data(), g.orientation.coeffs().data(),
                     sizeof(double) * 4))
        ++bad_pose;
    }
    if (trial >= 5) continue;
    const auto masks = scene_masks(s);
    const RenderMaps a = render(s, cam, 0.5), b = render_gaussians(s.gaussians, &masks, cam);
    bool same = same_bits(a.color.data.data(), b.color.data.data(),
                          a.color.data.size() * sizeof(Vector3d)) &&
                same_bits(a.depth.data.data(), b.depth.data.data(),
                          a.depth.data.size() * sizeof(double)) &&
                same_bits(a.alpha.data.data(), b.alpha.data.data(),
                          a.alpha.data.size() * sizeof(double)) &&
                same_bits(a.normal.data.data(), b.normal.data.data(),
                          a.normal.data.size() * sizeof(Vector3d)) &&
                a.depth_valid.data == b.depth_valid.data;
    bad_render += !same;
  }
  report(9, "canonical identity", bad_pose == 0 && bad_render == 0,
         fmt::format("{} Gaussians differ at t = 0.5 over 20 scenes, {} of 5 renders differ "
                     "(bitwise)",
                     bad_pose, bad_render));
}

void meshing() {
  // Unit sphere seen by the 26-view rig, depth by ray-sphere intersection.
  const double voxel = 0.04;
  const auto rig = camera_rig(Vector3d::Zero(), 1.0, 96, 96);
  std::vector<DepthView> views;
  for (const auto& cam : rig) {
    DepthView v;
    v.camera = cam;
    v.depth = ImageF(cam.width, cam.height, 0.0);
    const Vector3d o = cam.world_to_camera.translation();  // sphere center in camera frame
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        const Vector3d r = pixel_ray(cam, x, y);
        const double a = r.squaredNorm(), bq = -2.0 * r.dot(o), c = o.squaredNorm() - 1.0;
        const double disc = bq * bq - 4.0 * a * c;
        if (disc >= 0.0) v.depth(x, y) = (-bq - std::sqrt(disc)) / (2.0 * a);
      }
    views.push_back(std::move(v));
  }
  const GridSpec spec =
      GridSpec::covering(Vector3d::Constant(-1.0), Vector3d::Constant(1.0), voxel, 4 * voxel);
  const TriangleMesh sphere = marching_cubes(fuse(views, spec));
  double worst = sphere.vertices.empty() ? 1e9 : 0.0;
  for (const auto& v : sphere.vertices) worst = std::max(worst, std::abs(v.norm() - 1.0));

  // Door of a fitted hinge: mesh at t = 1 against the t = 0 mesh moved by
  // the recovered relative motion.
  FitConfig cfg = FitConfig::geometry_profile();
  Fitted f = fit_kind("hinge", cfg);
  const ArticulatedScene& s = f.fit.scene;
  MeshOptions opts;
  opts.voxel = voxel;
  Vector3d lo = Vector3d::Constant(1e9), hi = -lo;
  for (const auto& g : f.synth.cloud_t0.points) lo = lo.cwiseMin(g), hi = hi.cwiseMax(g);
  const auto cams = camera_rig(0.5 * (lo + hi), 0.5 * (hi - lo).norm() + 0.2, opts.width,
                               opts.height);
  const ExtractedMeshes m0 = extract_part_meshes(s, 0.0, cams, opts);
  const ExtractedMeshes m1 = extract_part_meshes(s, 1.0, cams, opts);
  auto door = [](const ExtractedMeshes& m) -> const TriangleMesh* {
    for (const auto& p : m.parts)
      if (p.part == 1) return &p.mesh;
    return nullptr;
  };
  double dist = 1e9;
  if (door(m0) && door(m1)) {
    const RigidTransform rel =
        joint_transform(s.joints[1], 1.0) * joint_transform(s.joints[1], 0.0).inverse();
    auto a = sample_surface(*door(m0), 20000, 1);
    for (auto& p : a) p = rel.apply(p);
    dist = mean_surface_distance(a, sample_surface(*door(m1), 20000, 2));
  }
  report(10, "TSDF meshing", worst <= 1.5 * voxel && dist <= 2.0 * voxel,
         fmt::format("sphere vertices within {:.4f} of radius 1 (<= {:.2f}), {} vertices; door "
                     "t=1 vs moved t=0 mesh {:.4f} (<= {:.2f}, symmetric mean surface distance)",
                     worst, 1.5 * voxel, sphere.vertices.size(), dist, 2.0 * voxel));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int sh(const std::string& args) {
  const int status = std::system((std::string(ARTIKIN_CLI) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism() {
  testing::TempDir dir("acceptance");
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  int codes = sh("gen --kind hinge --seed 4 --out " + q(dir / "scene"));
  for (const char* run : {"a", "b"}) {
    codes += sh("fit --input " + q(dir / "scene") + " --seed 9 --out " + q(dir / run));
    codes += sh(std::string("eval --scene ") + q(dir / run / "scene.json") + " --gt " +
                q(dir / "scene" / "gt.json") + " --out " + q(dir / run));
  }
  const std::string la = slurp(dir / "a" / "loss_log.jsonl"), lb = slurp(dir / "b" / "loss_log.jsonl");
  const std::string ma = slurp(dir / "a" / "metrics.json"), mb = slurp(dir / "b" / "metrics.json");
  const auto lines = std::count(la.begin(), la.end(), '\n');
  report(11, "determinism", codes == 0 && !la.empty() && la == lb && !ma.empty() && ma == mb,
         fmt::format("two CLI fits: loss logs {} ({} lines), metrics {}; exit codes {}",
                     la == lb ? "identical" : "DIFFER", lines, ma == mb ? "identical" : "DIFFER",
                     codes == 0 ? "all 0" : "NON-ZERO"));
}

}  // namespace

int main() {
  init_logging();
  const FitConfig geometry = FitConfig::geometry_profile();
  info(fmt::format("fits use the geometry profile (temperature {}, vote weight {}), {} iterations",
                   geometry.temperature, geometry.weights.vote, kIterations));
  criterion(1, "revolute recovery", [&] { revolute(geometry); });
  criterion(2, "prismatic recovery", [&] { prismatic(geometry); });
  criterion(3, "screw recovery", [&] { screw(geometry); });
  criterion(4, "multi-part recovery", [&] { multi_part(geometry); });
  criterion(5, "unbiased depth", unbiased_depth);
  criterion(6, "temporal constraint", temporal_constraint);
  criterion(7, "gradient correctness", gradient_check);
  criterion(8, "Hungarian oracle", hungarian_oracle);
  criterion(9, "canonical identity", canonical_identity);
  criterion(10, "TSDF meshing", meshing);
  criterion(11, "determinism", determinism);
  try {
    default_config_info();
  } catch (const std::exception& e) {
    info(std::string("default config run threw: ") + e.what());
  }
  std::cout << fmt::format("{} of 11 criteria passed", 11 - failures) << std::endl;
  return failures == 0 ? 0 : 1;
}
