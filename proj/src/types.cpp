#include "artikin/types.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "artikin/errors.hpp"

namespace artikin {

namespace {

bool finite(const Eigen::MatrixXd& m) { return m.allFinite(); }

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw InvariantError(path, what);
}

}  // namespace

int PlanarGaussian::shortest_axis() const {
  int idx = 0;
  scale.minCoeff(&idx);
  return idx;
}

Vector3d PlanarGaussian::normal() const {
  return orientation.normalized().toRotationMatrix().col(shortest_axis());
}

PartModel PartModel::identity(int k) {
  PartModel pm;
  pm.centers.assign(k, Vector3d::Zero());
  pm.orientations.assign(k, Matrix3d::Identity());
  pm.scales.assign(k, Vector3d::Ones());
  return pm;
}

Camera Camera::look_at(const Vector3d& eye, const Vector3d& target,
                       const Vector3d& up, double fov_y_deg, int width,
                       int height) {
  Vector3d z = (target - eye).normalized();
  Vector3d x = z.cross(up);
  if (x.norm() < 1e-9) x = z.unitOrthogonal();
  x.normalize();
  Vector3d y = z.cross(x);
  Matrix3d r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();

  Camera cam;
  cam.width = width;
  cam.height = height;
  double f = 0.5 * height / std::tan(0.5 * fov_y_deg * kPi / 180.0);
  cam.K << f, 0, 0.5 * width, 0, f, 0.5 * height, 0, 0, 1;
  cam.world_to_camera.linear() = r;
  cam.world_to_camera.translation() = -r * eye;
  return cam;
}

void validate(const PlanarGaussian& g, int k, const std::string& path) {
  require(finite(g.center), path + ".center", "non-finite");
  require(std::abs(g.orientation.norm() - 1.0) <= kUnitTolerance,
          path + ".orientation", "quaternion is not unit");
  require(finite(g.scale) && (g.scale.array() > 0.0).all(), path + ".scale",
          "scale components must be finite and > 0");
  require(std::isfinite(g.opacity_logit), path + ".opacity", "non-finite");
  require(finite(g.color) && (g.color.array() >= 0.0).all() &&
              (g.color.array() <= 1.0).all(),
          path + ".color", "color must lie in [0,1]");
  require(g.seg_logits.size() == k, path + ".seg_logits",
          "length " + std::to_string(g.seg_logits.size()) + " != k=" +
              std::to_string(k));
  require(finite(g.seg_logits), path + ".seg_logits", "non-finite");
}

void validate(const JointParams& j, const std::string& path) {
  require(std::isfinite(j.theta), path + ".theta", "non-finite");
  require(std::abs(j.theta) <= kPi / 2 + 1e-12, path + ".theta",
          "must lie in [-pi/2, pi/2]");
  require(std::abs(j.axis.norm() - 1.0) <= kUnitTolerance, path + ".axis",
          "axis is not unit");
  require(finite(j.pivot), path + ".pivot", "non-finite");
  require(finite(j.translation), path + ".translation", "non-finite");
}

void validate(const PartModel& pm, int k, const std::string& path) {
  require(pm.size() == k && static_cast<int>(pm.orientations.size()) == k &&
              static_cast<int>(pm.scales.size()) == k,
          path, "expected " + std::to_string(k) + " parts");
  for (int j = 0; j < k; ++j) {
    std::string p = path + "[" + std::to_string(j) + "]";
    require(finite(pm.centers[j]), p + ".center", "non-finite");
    const Matrix3d& v = pm.orientations[j];
    require((v.transpose() * v - Matrix3d::Identity()).cwiseAbs().maxCoeff() <=
                    kUnitTolerance &&
                std::abs(v.determinant() - 1.0) <= kUnitTolerance,
            p + ".orientation", "not a rotation matrix");
    require(finite(pm.scales[j]) && (pm.scales[j].array() > 0.0).all(),
            p + ".scale", "components must be > 0");
  }
}

void validate(const Camera& c, const std::string& path) {
  require(finite(c.K) && c.fx() > 0 && c.fy() > 0, path + ".K",
          "fx and fy must be > 0");
  Matrix3d r = c.world_to_camera.linear();
  require((r.transpose() * r - Matrix3d::Identity()).cwiseAbs().maxCoeff() <=
              kUnitTolerance,
          path + ".pose", "rotation is not orthonormal");
  require(c.width > 0 && c.height > 0, path + ".size", "must be positive");
}

void validate(const ArticulatedScene& s) {
  require(s.k >= 2, "k", "need at least two parts");
  require(static_cast<int>(s.joints.size()) == s.k, "joints",
          "expected k joints");
  require(s.temperature > 0.0, "temperature", "must be > 0");
  for (int j = 0; j < s.k; ++j)
    validate(s.joints[j], "joints[" + std::to_string(j) + "]");
  require(s.joints[0].is_identity(), "joints[0]",
          "static joint must be the identity");
  validate(s.part_model, s.k, "part_model");
  for (std::size_t i = 0; i < s.gaussians.size(); ++i)
    validate(s.gaussians[i], s.k, "gaussians[" + std::to_string(i) + "]");
}

void validate(const StateObservation& o, const std::string& path) {
  require(o.t >= 0.0 && o.t <= 1.0, path + ".t", "must lie in [0,1]");
  for (std::size_t v = 0; v < o.views.size(); ++v) {
    std::string p = path + ".views[" + std::to_string(v) + "]";
    validate(o.views[v].camera, p + ".camera");
    require(o.views[v].image.width == o.views[v].camera.width &&
                o.views[v].image.height == o.views[v].camera.height,
            p + ".image", "size does not match camera");
  }
}

Matrix3d nearest_rotation(const Matrix3d& m) {
  Eigen::JacobiSVD<Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d u = svd.matrixU();
  Matrix3d v = svd.matrixV();
  Matrix3d d = Matrix3d::Identity();
  d(2, 2) = (u * v.transpose()).determinant() < 0 ? -1.0 : 1.0;
  return u * d * v.transpose();
}

void renormalize(PlanarGaussian& g) {
  g.orientation.normalize();
  g.scale = g.scale.cwiseMax(kScaleFloor);
  g.color = g.color.cwiseMax(0.0).cwiseMin(1.0);
}

void renormalize(JointParams& j) {
  double n = j.axis.norm();
  j.axis = n > 1e-12 ? Vector3d(j.axis / n) : Vector3d::UnitZ();
  j.theta = std::clamp(j.theta, -kPi / 2, kPi / 2);
}

void renormalize(PartModel& pm) {
  for (auto& v : pm.orientations) v = nearest_rotation(v);
  for (auto& s : pm.scales) s = s.cwiseMax(kScaleFloor);
}

void renormalize(ArticulatedScene& s) {
  for (auto& g : s.gaussians) renormalize(g);
  for (auto& j : s.joints) renormalize(j);
  if (!s.joints.empty()) s.joints[0] = JointParams::identity();
  renormalize(s.part_model);
}

}  // namespace artikin
