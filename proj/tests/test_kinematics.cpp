#include <doctest.h>

#include <cstring>

#include "artikin/errors.hpp"
#include "artikin/kinematics.hpp"
#include "artikin/segmentation.hpp"
#include "artikin/so3.hpp"
#include "support.hpp"

using namespace artikin;
using testing::Gen;

namespace {

JointParams make_joint(double theta, Vector3d axis, Vector3d pivot = Vector3d::Zero(),
                       Vector3d translation = Vector3d::Zero()) {
  JointParams j;
  j.theta = theta;
  j.axis = axis;
  j.pivot = pivot;
  j.translation = translation;
  return j;
}

VectorXd one_hot(int k, int j) {
  VectorXd m = VectorXd::Zero(k);
  m[j] = 1.0;
  return m;
}

bool bitwise_equal(const std::vector<PlanarGaussian>& a, const std::vector<PlanarGaussian>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(a[i].center.data(), b[i].center.data(), 3 * sizeof(double)) != 0)
      return false;
    if (std::memcmp(a[i].orientation.coeffs().data(), b[i].orientation.coeffs().data(),
                    4 * sizeof(double)) != 0)
      return false;
    if (a[i].scale != b[i].scale || a[i].color != b[i].color) return false;
    if (a[i].opacity_logit != b[i].opacity_logit) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("theta follows the signed progress from the canonical state") {
  JointParams j = make_joint(kPi / 2, Vector3d::UnitZ());
  CHECK(theta_at(j, 0.5) == 0.0);
  CHECK(theta_at(j, 1.0) == doctest::Approx(kPi / 2));
  CHECK(theta_at(j, 0.0) == doctest::Approx(-kPi / 2));
  j.translation = Vector3d(0.2, -0.4, 1.0);
  CHECK(translation_at(j, 0.5).isZero(0.0));
  CHECK(translation_at(j, 1.0).isApprox(j.translation));
  CHECK(translation_at(j, 0.0).isApprox(-j.translation));
}

TEST_CASE("states outside [0, 1] are clamped") {
  bool clamped = false;
  CHECK(clamp_state(1.5, &clamped) == 1.0);
  CHECK(clamped);
  CHECK(clamp_state(-0.1, &clamped) == 0.0);
  CHECK(clamped);
  CHECK(clamp_state(0.25, &clamped) == 0.25);
  CHECK_FALSE(clamped);
  JointParams j = make_joint(1.0, Vector3d::UnitX());
  CHECK(theta_at(j, 3.0) == theta_at(j, 1.0));
}

TEST_CASE("rotation quaternion of a joint") {
  Gen gen(1);
  for (int i = 0; i < 10; ++i) {
    Quaterniond q = quat_at(gen.joint(), 0.5);
    CHECK(q.w() == 1.0);
    CHECK(q.vec().isZero(0.0));
  }
  Quaterniond q = quat_at(make_joint(kPi, Vector3d::UnitZ()), 1.0);
  CHECK(std::abs(q.w()) < 1e-12);
  CHECK(q.vec().isApprox(Vector3d::UnitZ(), 1e-12));
  q = quat_at(make_joint(kPi / 2, Vector3d::UnitZ()), 1.0);
  CHECK(q.w() == doctest::Approx(std::sqrt(0.5)));
  CHECK(q.z() == doctest::Approx(std::sqrt(0.5)));
  CHECK(std::abs(q.norm() - 1.0) < 1e-9);
}

TEST_CASE("joint transform examples") {
  Gen gen(2);
  for (int i = 0; i < 5; ++i) {
    RigidTransform tf = joint_transform(JointParams::identity(), gen.uniform());
    CHECK(tf.rotation.isIdentity(0.0));
    CHECK(tf.translation.isZero(0.0));
  }
  RigidTransform quarter =
      joint_transform(make_joint(kPi / 2, Vector3d::UnitZ(), Vector3d(1, 0, 0)), 1.0);
  CHECK(quarter.apply(Vector3d(2, 0, 0)).isApprox(Vector3d(1, 1, 0), 1e-12));
  RigidTransform screw = joint_transform(
      make_joint(kPi / 2, Vector3d::UnitZ(), Vector3d::Zero(), Vector3d(0, 0, 0.1)), 1.0);
  Vector3d p = screw.apply(Vector3d(1, 0, 0));
  CHECK((p - Vector3d(0, 1, 0.1)).norm() < 1e-12);
}

TEST_CASE("blend_position examples") {
  Gen gen(3);
  std::vector<JointParams> joints = {JointParams::identity(), gen.joint(), gen.joint()};
  for (int i = 0; i < 20; ++i) {
    Vector3d mu = gen.vec();
    double t = gen.uniform();
    for (int j = 0; j < 3; ++j) {
      Vector3d expect = joint_transform(joints[j], t).apply(mu);
      CHECK((blend_position(one_hot(3, j), joints, t, mu) - expect).norm() < 1e-12);
    }
    VectorXd m = Vector3d(gen.uniform(), gen.uniform(), gen.uniform());
    m /= m.sum();
    CHECK(blend_position(m, joints, 0.5, mu) == mu);
  }
  std::vector<JointParams> two = {JointParams::identity(),
                                  make_joint(0.0, Vector3d::UnitZ(), Vector3d::Zero(),
                                             Vector3d(0, 0, 2))};
  Vector3d mu(0.3, 0.1, -0.2);
  CHECK(blend_position(Eigen::Vector2d(0.5, 0.5), two, 1.0, mu)
            .isApprox(mu + Vector3d(0, 0, 1), 1e-12));
  CHECK_THROWS_AS(blend_position(Eigen::Vector2d(0.7, 0.7), two, 1.0, mu), ContractError);
  CHECK_THROWS_AS(blend_position(Eigen::Vector2d(1.2, -0.2), two, 1.0, mu), ContractError);
  CHECK_THROWS_AS(blend_position(Vector3d(1, 0, 0), two, 1.0, mu), ContractError);
}

TEST_CASE("blend_orientation examples") {
  Gen gen(4);
  std::vector<JointParams> joints = {JointParams::identity(), gen.joint()};
  for (int i = 0; i < 20; ++i) {
    Quaterniond q = gen.quat();
    double t = gen.uniform();
    Quaterniond expect = quat_at(joints[1], t) * q;
    Quaterniond got = blend_orientation(one_hot(2, 1), joints, t, q);
    CHECK(std::abs(std::abs(got.dot(expect)) - 1.0) < 1e-12);
    Quaterniond canon = blend_orientation(Eigen::Vector2d(0.3, 0.7), joints, 0.5, q);
    CHECK(canon.coeffs() == q.coeffs());
  }
  std::vector<JointParams> same = {gen.joint(), JointParams()};
  same[1] = same[0];
  Quaterniond q = gen.quat();
  Quaterniond got = blend_orientation(Eigen::Vector2d(0.5, 0.5), same, 1.0, q);
  Quaterniond expect = quat_at(same[0], 1.0) * q;
  CHECK(std::abs(std::abs(got.dot(expect)) - 1.0) < 1e-12);
}

TEST_CASE("property: blended orientations are unit quaternions") {
  Gen gen(5);
  for (int i = 0; i < 300; ++i) {
    int k = gen.integer(2, 5);
    std::vector<JointParams> joints = {JointParams::identity()};
    for (int j = 1; j < k; ++j) joints.push_back(gen.joint());
    VectorXd m(k);
    for (int j = 0; j < k; ++j) m[j] = gen.uniform();
    m /= m.sum();
    Quaterniond got = blend_orientation(m, joints, gen.uniform(), gen.quat());
    CHECK(std::abs(got.norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("canonical state is exactly the identity for random scenes") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Gen gen(seed);
    ArticulatedScene s = gen.scene(gen.integer(2, 5), 40);
    auto posed = transform_scene(s, 0.5);
    CHECK(bitwise_equal(posed, s.gaussians));
  }
}

TEST_CASE("identity joints leave the scene unchanged at every state") {
  Gen gen(8);
  ArticulatedScene s = gen.scene(3, 30);
  for (auto& j : s.joints) j = JointParams::identity();
  for (double t : {0.0, 0.2, 0.9, 1.0}) CHECK(bitwise_equal(transform_scene(s, t), s.gaussians));
}

TEST_CASE("hinge scene posed at t = 1 matches direct single-joint posing") {
  Gen gen(9);
  ArticulatedScene s = gen.scene(2, 200);
  s.joints[1] = make_joint(kPi / 6, Vector3d(0, 0, -1), Vector3d(-0.4, -0.02, 0.5));
  // Sharp logits make the masks one-hot to double precision.
  for (auto& g : s.gaussians) {
    int part = g.center.x() > 0.0 ? 1 : 0;
    g.seg_logits = VectorXd::Zero(2);
    g.seg_logits[part] = 1e4;
  }
  s.temperature = 1.0;
  auto posed = transform_scene(s, 1.0);
  const Matrix3d r = Eigen::AngleAxisd(kPi / 6, Vector3d(0, 0, -1)).toRotationMatrix();
  const Vector3d o(-0.4, -0.02, 0.5);
  for (std::size_t i = 0; i < posed.size(); ++i) {
    const Vector3d& mu = s.gaussians[i].center;
    Vector3d expect = mu.x() > 0.0 ? Vector3d(r * (mu - o) + o) : mu;
    CHECK((posed[i].center - expect).norm() < 1e-9);
    CHECK(posed[i].scale == s.gaussians[i].scale);
    CHECK(posed[i].color == s.gaussians[i].color);
    CHECK(posed[i].opacity_logit == s.gaussians[i].opacity_logit);
  }
}

TEST_CASE("property: quaternion rotation matches the matrix") {
  Gen gen(10);
  for (int i = 0; i < 500; ++i) {
    JointParams j = gen.joint();
    double t = gen.uniform();
    Quaterniond q = quat_at(j, t);
    CHECK(std::abs(q.norm() - 1.0) < 1e-9);
    Vector3d x = gen.vec(-3, 3);
    Quaterniond xq(0.0, x.x(), x.y(), x.z());
    Vector3d sandwich = (q * xq * q.conjugate()).vec();
    CHECK((joint_transform(j, t).rotation * x - sandwich).norm() < 1e-9);
    CHECK((so3::exp(theta_at(j, t) * j.axis) * x - sandwich).norm() < 1e-9);
  }
}

TEST_CASE("property: one-hot masks give rigid motion") {
  Gen gen(11);
  for (int trial = 0; trial < 30; ++trial) {
    int k = gen.integer(2, 4);
    std::vector<JointParams> joints = {JointParams::identity()};
    for (int j = 1; j < k; ++j) joints.push_back(gen.joint());
    int part = gen.integer(0, k - 1);
    double t = gen.uniform();
    std::vector<Vector3d> pts, moved;
    for (int i = 0; i < 12; ++i) {
      pts.push_back(gen.vec(-2, 2));
      moved.push_back(blend_position(one_hot(k, part), joints, t, pts.back()));
    }
    for (int a = 0; a < 12; ++a)
      for (int b = a + 1; b < 12; ++b)
        CHECK(std::abs((pts[a] - pts[b]).norm() - (moved[a] - moved[b]).norm()) < 1e-9);
  }
}

TEST_CASE("property: without translation, t and 1 - t are inverse motions") {
  Gen gen(12);
  for (int i = 0; i < 200; ++i) {
    JointParams j = gen.joint();
    j.translation.setZero();
    double t = gen.uniform();
    RigidTransform a = joint_transform(j, t), b = joint_transform(j, 1.0 - t);
    RigidTransform both = a * b;
    CHECK(both.rotation.isIdentity(1e-9));
    CHECK(both.translation.norm() < 1e-9);
    Vector3d x = gen.vec();
    CHECK((a.apply(b.apply(x)) - x).norm() < 1e-9);
  }
}

TEST_CASE("so3 helpers") {
  Gen gen(13);
  for (int i = 0; i < 200; ++i) {
    Vector3d w = gen.unit() * gen.uniform(0.0, 3.0);
    Matrix3d r = so3::exp(w);
    CHECK((r * r.transpose()).isIdentity(1e-12));
    CHECK(r.determinant() == doctest::Approx(1.0));
    CHECK((so3::log(r) - w).norm() < 1e-9);
    Vector3d d = gen.unit() * 1e-6;
    Matrix3d lhs = so3::exp(w + d);
    Matrix3d rhs = so3::exp(so3::left_jacobian(w) * d) * r;
    CHECK((lhs - rhs).norm() < 1e-10);
    CHECK(so3::angle_between(r, so3::exp(w * 0.5)) ==
          doctest::Approx(0.5 * w.norm()).epsilon(1e-9));
  }
}
