#include "artikin/kinematics.hpp"

#include <algorithm>
#include <cmath>

#include "artikin/errors.hpp"
#include "artikin/log.hpp"
#include "artikin/segmentation.hpp"

namespace artikin {

namespace {

void check_simplex(const VectorXd& mask, std::size_t k) {
  if (static_cast<std::size_t>(mask.size()) != k)
    throw ContractError("mask length does not match joint count");
  if ((mask.array() < 0.0).any() || std::abs(mask.sum() - 1.0) > 1e-6)
    throw ContractError("mask is not on the probability simplex");
}

}  // namespace

double clamp_state(double t, bool* clamped) {
  double c = std::clamp(t, 0.0, 1.0);
  if (clamped != nullptr) *clamped = c != t;
  return c;
}

double state_factor(double t) {
  bool clamped = false;
  double c = clamp_state(t, &clamped);
  if (clamped) spdlog::warn("state t={} clamped to [0,1]", t);
  return (c - kCanonicalState) / kCanonicalState;
}

double theta_at(const JointParams& joint, double t) {
  return state_factor(t) * joint.theta;
}

Vector3d translation_at(const JointParams& joint, double t) {
  return state_factor(t) * joint.translation;
}

Quaterniond quat_at(const JointParams& joint, double t) {
  double half = 0.5 * theta_at(joint, t);
  double s = std::sin(half);
  return Quaterniond(std::cos(half), joint.axis.x() * s, joint.axis.y() * s,
                     joint.axis.z() * s);
}

RigidTransform joint_transform(const JointParams& joint, double t) {
  RigidTransform tf;
  tf.rotation = quat_at(joint, t).toRotationMatrix();
  tf.translation = joint.pivot - tf.rotation * joint.pivot + translation_at(joint, t);
  return tf;
}

Vector3d blend_position(const VectorXd& mask,
                        const std::vector<JointParams>& joints, double t,
                        const Vector3d& mu) {
  check_simplex(mask, joints.size());
  // Written as a displacement so that t* reproduces mu bit-exactly.
  Vector3d offset = Vector3d::Zero();
  for (std::size_t j = 0; j < joints.size(); ++j) {
    if (mask[j] == 0.0) continue;
    Matrix3d r = quat_at(joints[j], t).toRotationMatrix();
    Vector3d d = (r - Matrix3d::Identity()) * (mu - joints[j].pivot) +
                 translation_at(joints[j], t);
    offset += mask[j] * d;
  }
  return mu + offset;
}

Quaterniond blend_orientation(const VectorXd& mask,
                              const std::vector<JointParams>& joints, double t,
                              const Quaterniond& orientation) {
  check_simplex(mask, joints.size());
  Eigen::Vector4d sum = Eigen::Vector4d::Zero();
  for (std::size_t j = 0; j < joints.size(); ++j) {
    Quaterniond q = quat_at(joints[j], t);
    Eigen::Vector4d c = q.coeffs();
    if (q.w() < 0) c = -c;
    sum += mask[j] * c;
  }
  Quaterniond blended;
  if (sum.norm() < 1e-12) {
    Eigen::Index arg = 0;
    mask.maxCoeff(&arg);
    blended = quat_at(joints[arg], t);
  } else {
    if (sum.head<3>().isZero(0.0)) return orientation;
    blended.coeffs() = sum / sum.norm();
  }
  return (blended * orientation).normalized();
}

std::vector<PlanarGaussian> transform_gaussians(
    const std::vector<PlanarGaussian>& gaussians,
    const std::vector<VectorXd>& masks, const std::vector<JointParams>& joints,
    double t) {
  std::vector<PlanarGaussian> out = gaussians;
  for (std::size_t i = 0; i < gaussians.size(); ++i) {
    out[i].center = blend_position(masks[i], joints, t, gaussians[i].center);
    out[i].orientation =
        blend_orientation(masks[i], joints, t, gaussians[i].orientation);
  }
  return out;
}

std::vector<PlanarGaussian> transform_scene(const ArticulatedScene& scene,
                                            double t) {
  return transform_gaussians(scene.gaussians, scene_masks(scene), scene.joints, t);
}

}  // namespace artikin
