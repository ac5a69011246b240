#include <doctest.h>

#include <algorithm>

#include "artikin/errors.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/losses.hpp"
#include "support.hpp"

using namespace artikin;
using testing::Gen;

namespace {

PlanarGaussian flat(const Vector3d& c, const Vector3d& n, double s, int part = 0) {
  PlanarGaussian g;
  Matrix3d frame;
  Vector3d u = n.unitOrthogonal();
  frame << u, n.cross(u), n;
  g.center = c;
  g.orientation = Quaterniond(frame);
  g.scale = Vector3d(s, s, 1e-6);
  g.set_opacity(0.999);
  g.seg_logits = VectorXd::Zero(2);
  g.seg_logits[part] = 1e4;
  return g;
}

ArticulatedScene two_part(std::vector<PlanarGaussian> gs) {
  ArticulatedScene s;
  s.k = 2;
  s.joints = {JointParams::identity(), JointParams::identity()};
  s.part_model = PartModel::identity(2);
  s.gaussians = std::move(gs);
  return s;
}

Camera front_camera(int size = 48) {
  return Camera::look_at(Vector3d(0, 0, -2), Vector3d::Zero(), Vector3d::UnitY(), 50, size, size);
}

ImageRGB random_image(Gen& gen, int w, int h) {
  ImageRGB img(w, h);
  for (auto& p : img.data) p = gen.vec(0.0, 1.0);
  return img;
}

/// Windowed SSIM straight from the definition: 11 x 11 Gaussian weights
/// (sigma 1.5), zero padding, averaged over pixels and channels.
double ssim_oracle(const ImageRGB& a, const ImageRGB& b) {
  const int W = a.width, H = a.height;
  double w[11][11], total = 0.0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j)
      total += w[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 2.25));
  for (auto& row : w)
    for (double& v : row) v /= total;
  const double c1 = 1e-4, c2 = 9e-4;
  double sum = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
        for (int dy = -5; dy <= 5; ++dy)
          for (int dx = -5; dx <= 5; ++dx) {
            int sx = x + dx, sy = y + dy;
            if (sx < 0 || sy < 0 || sx >= W || sy >= H) continue;
            double wt = w[dy + 5][dx + 5];
            double u = a(sx, sy)[c], v = b(sx, sy)[c];
            mx += wt * u, my += wt * v;
            sxx += wt * u * u, syy += wt * v * v, sxy += wt * u * v;
          }
        double vx = sxx - mx * mx, vy = syy - my * my, cv = sxy - mx * my;
        sum += ((2 * mx * my + c1) * (2 * cv + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      }
  return sum / (3.0 * W * H);
}

double chamfer_oracle(const std::vector<Vector3d>& a, const std::vector<Vector3d>& b) {
  auto one = [](const std::vector<Vector3d>& p, const std::vector<Vector3d>& q) {
    double s = 0.0;
    for (const auto& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : q) best = std::min(best, (x - y).squaredNorm());
      s += best;
    }
    return s / p.size();
  };
  return 0.5 * (one(a, b) + one(b, a));
}

std::vector<StateObservation> geometry_observations(Gen& gen, const ArticulatedScene& s) {
  std::vector<StateObservation> obs(2);
  obs[0].t = 0.0;
  obs[1].t = 1.0;
  for (auto& o : obs) {
    auto posed = transform_scene(s, o.t);
    for (auto& g : posed) g.center += gen.vec(-0.02, 0.02);
    o.gaussians = posed;
  }
  return obs;
}

}  // namespace

TEST_CASE("render loss examples") {
  Gen gen(1);
  ImageRGB a = random_image(gen, 20, 16);
  CHECK(l_render(a, a, 0.2) == doctest::Approx(0.0).epsilon(1e-15));
  ImageRGB b = a;
  for (auto& p : b.data) p = (p.array() + 0.1).matrix();
  CHECK(l_render(a, b, 0.0) == doctest::Approx(0.1).epsilon(1e-12));
  ImageRGB c = random_image(gen, 20, 16);
  double expect = 0.5 * (1.0 - ssim_oracle(a, c));
  CHECK(l_render(a, c, 1.0) == doctest::Approx(expect).epsilon(1e-10));
  CHECK(ssim(a, c) == doctest::Approx(ssim_oracle(a, c)).epsilon(1e-10));
  CHECK_THROWS_AS(l_render(a, ImageRGB(19, 16), 0.2), ContractError);
}

TEST_CASE("scale loss examples") {
  PlanarGaussian g;
  g.scale = Vector3d(0.1, 0.2, 1e-7);
  CHECK(l_scale({g, g, g}) == doctest::Approx(1e-7));
  g.scale = Vector3d(3, 2, 1);
  CHECK(l_scale({g}) == 1.0);
  PlanarGaussian h;
  h.scale = Vector3d(3, 4, 5);
  CHECK(l_scale({g, h}) == 2.0);
}

TEST_CASE("center loss examples") {
  ArticulatedScene s = two_part({flat({1, 0, 0}, {0, 0, 1}, 0.1, 0), flat({3, 0, 0}, {0, 0, 1}, 0.1, 0),
                                 flat({0, 1, 0}, {0, 0, 1}, 0.1, 1), flat({0, 3, 0}, {0, 0, 1}, 0.1, 1)});
  s.part_model.centers = {Vector3d(2, 0, 0), Vector3d(0, 2, 0)};
  CHECK(l_center(s) == 0.0);
  s.part_model.centers[0] = Vector3d(3, 0, 0);
  s.part_model.centers[1] = Vector3d(0, 2, 0);
  CHECK(l_center(s) == doctest::Approx(0.5));  // one part with offset 1, one exact
  s.part_model.centers[1] = Vector3d(0, 2, 3);
  CHECK(l_center(s) == doctest::Approx(5.0));  // mean of 1 and 9
  s.part_model.centers[0] = Vector3d(2, 0, 0);
  s.part_model.centers[1] = Vector3d(1, 2, 0);
  CHECK(l_center(s) == doctest::Approx(0.5));
}

TEST_CASE("center loss skips parts without members") {
  ArticulatedScene s = two_part({flat({1, 0, 0}, {0, 0, 1}, 0.1, 0)});
  s.part_model.centers = {Vector3d(2, 0, 0), Vector3d(50, 0, 0)};
  CHECK(l_center(s) == doctest::Approx(1.0));
}

TEST_CASE("point alignment examples") {
  ArticulatedScene s = two_part({flat({0, 0, 0}, {0, 0, 1}, 0.1)});
  CHECK(l_align_geometry(s, s.gaussians, 0.0) == 0.0);
  std::vector<PlanarGaussian> far = {flat({2, 0, 0}, {0, 0, 1}, 0.1)};
  CHECK(l_align_geometry(s, far, 0.3) == doctest::Approx(4.0));
  CHECK_THROWS_AS(l_align_geometry(s, {}, 0.0), ContractError);

  Gen gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    ArticulatedScene r = gen.scene(2, gen.integer(1, 40));
    std::vector<PlanarGaussian> target;
    for (int i = gen.integer(1, 40); i > 0; --i) target.push_back(gen.gaussian(2));
    double t = gen.uniform();
    double expect = chamfer_oracle(centers_of(transform_scene(r, t)), centers_of(target));
    CHECK(l_align_geometry(r, target, t) == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("normal time derivative") {
  Camera cam = front_camera();
  SUBCASE("vanishes for identity joints") {
    Gen gen(3);
    ArticulatedScene s = gen.scene(2, 100);
    s.joints[1] = JointParams::identity();
    for (double t0 : {0.0, 1.0}) {
      NormalGradient g = grad_normal(s, cam, t0);
      int valid = 0;
      for (std::size_t i = 0; i < g.grad.data.size(); ++i)
        if (g.valid.data[i]) {
          ++valid;
          CHECK(g.grad.data[i].isZero(0.0));
        }
      CHECK(valid > 0);
    }
  }
  SUBCASE("matches the analytic derivative of a rotating plane") {
    for (double deg : {1.0, 3.0, 5.0}) {
      ArticulatedScene s = two_part({flat({0, 0, 0}, {0, 0, -1}, 1.0, 1)});
      s.joints[1].theta = deg * kPi / 180.0;
      s.joints[1].axis = Vector3d::UnitY();
      const Vector3d n_cam = cam.world_to_camera.linear() * Vector3d(0, 0, -1);
      const Vector3d a_cam = cam.world_to_camera.linear() * Vector3d::UnitY();
      // dN/dt at t* = dtheta/dt (a x n) with theta(t) = 2 (t - 1/2) theta.
      const Vector3d analytic = 2.0 * s.joints[1].theta * a_cam.cross(n_cam);
      for (double t0 : {0.0, 1.0}) {
        NormalGradient g = grad_normal(s, cam, t0);
        int valid = 0;
        double worst = 0.0;
        for (std::size_t i = 0; i < g.grad.data.size(); ++i) {
          if (!g.valid.data[i]) continue;
          ++valid;
          worst = std::max(worst, (g.grad.data[i] - analytic).norm() / analytic.norm());
        }
        CHECK(valid > 100);
        CHECK(worst <= 0.05);
      }
    }
  }
  SUBCASE("difference quotient sign") {
    ArticulatedScene s = two_part({flat({0, 0, 0}, {0, 0, -1}, 1.0, 1)});
    s.joints[1].theta = 0.05;
    s.joints[1].axis = Vector3d::UnitY();
    NormalGradient up = grad_normal(s, cam, 1.0), down = grad_normal(s, cam, 0.0);
    const std::size_t c = 24 * 48 + 24;
    REQUIRE(up.valid.data[c]);
    // N(0) - N(t*) is the mirror of N(1) - N(t*) to first order, and the
    // quotient divides by -1/2, so both estimates point the same way.
    CHECK(up.grad.data[c].dot(down.grad.data[c]) > 0.0);
  }
  CHECK_THROWS_AS(grad_normal(two_part({flat({0, 0, 0}, {0, 0, -1}, 1.0)}), cam, 0.5),
                  ContractError);
}

TEST_CASE("geometric constraint") {
  Camera cam = front_camera();
  const Vector3d n = Vector3d(0.3, -0.2, -1).normalized();
  ArticulatedScene plane = two_part({flat({0, 0, 0}, n, 1.0, 0)});
  ImageRGB flat_image(48, 48, Vector3d::Constant(0.5));

  SUBCASE("converged static planar scene") {
    for (double t0 : {0.0, 1.0}) CHECK(l_geo(plane, cam, t0, flat_image) <= 1e-3);
  }
  SUBCASE("identity joints leave only the static term") {
    Gen gen(4);
    ArticulatedScene s = gen.scene(2, 120);
    s.joints[1] = JointParams::identity();
    double stat = l_geo(s, cam, 0.5, flat_image);
    CHECK(stat > 0.0);
    CHECK(l_geo(s, cam, 1.0, flat_image) == doctest::Approx(stat).epsilon(1e-12));
    CHECK(l_geo(s, cam, 0.0, flat_image) == doctest::Approx(stat).epsilon(1e-12));
  }
  SUBCASE("edge pixels carry no weight") {
    Gen gen(5);
    ArticulatedScene s = gen.scene(2, 120);
    CHECK(l_geo(s, cam, 1.0, flat_image) > 0.0);
    // Two-pixel stripes give a Sobel response of 1 on every interior pixel.
    ImageRGB stripes(48, 48);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) stripes(x, y) = Vector3d::Constant((x / 2) % 2);
    CHECK(l_geo(s, cam, 1.0, stripes) == 0.0);
  }
  SUBCASE("nothing visible gives zero") {
    ArticulatedScene away = two_part({flat({0, 0, -5}, n, 1.0, 0)});
    CHECK(l_geo(away, cam, 1.0, flat_image) == 0.0);
  }
}

TEST_CASE("total loss") {
  Gen gen(6);
  ArticulatedScene s = gen.scene(2, 60);
  auto obs = geometry_observations(gen, s);
  for (auto& g : s.gaussians) g.center += gen.vec(-0.01, 0.01);

  SUBCASE("only the alignment weight") {
    LossWeights w{1.0, 0.0, 0.0, 0.0, 0.0, 0.2};
    LossReport r = total_loss(s, obs, w, LossMode::Geometry);
    CHECK(r.total == r.render);
    double expect = 0.5 * (l_align_geometry(s, *obs[0].gaussians, 0.0) +
                           l_align_geometry(s, *obs[1].gaussians, 1.0));
    CHECK(r.render == doctest::Approx(expect).epsilon(1e-12));
  }
  SUBCASE("report total is the weighted sum") {
    LossWeights w;
    LossContext ctx = make_loss_context(obs);
    BoundarySet b = detect_boundary(s, 10, 0.2);
    vote_regions(b, centers_of(s.gaussians), 2, 0);
    ctx.boundary = b;
    LossReport r = total_loss(s, obs, w, LossMode::Geometry, &ctx);
    double hand = w.render * r.render + w.scale * r.scale + w.center * r.center +
                  w.geo * r.geo + w.vote * r.vote;
    CHECK(r.total == doctest::Approx(hand).epsilon(1e-12));
    CHECK(r.scale == doctest::Approx(l_scale(s.gaussians)));
    CHECK(r.center == doctest::Approx(l_center(s)));
    CHECK(r.vote == doctest::Approx(vote_loss(b, scene_masks(s))));
  }
  SUBCASE("a duplicated state averages to the same value") {
    LossWeights w;
    std::vector<StateObservation> one = {obs[0]}, twice = {obs[0], obs[0]};
    CHECK(total_loss(s, one, w, LossMode::Geometry).total ==
          doctest::Approx(total_loss(s, twice, w, LossMode::Geometry).total).epsilon(1e-14));
  }
  SUBCASE("context trees do not change the value") {
    LossWeights w;
    LossContext ctx = make_loss_context(obs);
    CHECK(total_loss(s, obs, w, LossMode::Geometry, &ctx).total ==
          total_loss(s, obs, w, LossMode::Geometry).total);
  }
  SUBCASE("negative weights are rejected") {
    LossWeights w;
    w.geo = -1.0;
    CHECK_THROWS_AS(total_loss(s, obs, w, LossMode::Geometry), InvariantError);
  }
}

TEST_CASE("property: loss terms are finite, non-negative and order independent") {
  Gen gen(7);
  Camera cam = front_camera(24);
  for (int trial = 0; trial < 6; ++trial) {
    ArticulatedScene s = gen.scene(2, 40);
    std::vector<StateObservation> obs;
    for (double t : {0.0, 1.0, 0.3}) {
      StateObservation o;
      o.t = t;
      o.gaussians = transform_scene(s, t);
      for (int v = 0; v < 2; ++v) {
        Camera c = Camera::look_at(gen.unit() * 2.5, Vector3d::Zero(), Vector3d::UnitY(), 50, 24, 24);
        o.views.push_back({c, render(s, c, t).color});
      }
      obs.push_back(o);
    }
    for (auto& g : s.gaussians) g.center += gen.vec(-0.02, 0.02);
    LossWeights w;
    for (LossMode mode : {LossMode::Geometry, LossMode::Render}) {
      LossReport r = total_loss(s, obs, w, mode);
      for (double v : {r.render, r.scale, r.center, r.geo, r.vote, r.total}) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
      }
      auto shuffled = obs;
      std::reverse(shuffled.begin(), shuffled.end());
      for (auto& o : shuffled) std::reverse(o.views.begin(), o.views.end());
      CHECK(total_loss(s, shuffled, w, mode).total == doctest::Approx(r.total).epsilon(1e-12));
    }
  }
}
