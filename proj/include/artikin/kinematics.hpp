#pragma once

#include <vector>

#include "artikin/types.hpp"

namespace artikin {

struct RigidTransform {
  Matrix3d rotation = Matrix3d::Identity();
  Vector3d translation = Vector3d::Zero();

  Vector3d apply(const Vector3d& x) const { return rotation * x + translation; }
  RigidTransform inverse() const {
    return {rotation.transpose(), -(rotation.transpose() * translation)};
  }
  /// (*this) after `other`.
  RigidTransform operator*(const RigidTransform& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }
};

/// Clamps t into [0, 1]; sets *clamped when it had to.
double clamp_state(double t, bool* clamped = nullptr);

/// Signed progress (t - t*) / t* relative to the canonical state.
double state_factor(double t);

double theta_at(const JointParams& joint, double t);
Vector3d translation_at(const JointParams& joint, double t);
Quaterniond quat_at(const JointParams& joint, double t);
RigidTransform joint_transform(const JointParams& joint, double t);

/// Mask-weighted blend of the per-part screw motions applied to `mu`.
/// Throws ContractError when `mask` is not on the probability simplex.
Vector3d blend_position(const VectorXd& mask,
                        const std::vector<JointParams>& joints, double t,
                        const Vector3d& mu);

/// Applies the normalized, sign-aligned weighted sum of the part rotations to
/// `orientation`. Falls back to the argmax part's rotation when the weighted
/// sum degenerates.
Quaterniond blend_orientation(const VectorXd& mask,
                              const std::vector<JointParams>& joints, double t,
                              const Quaterniond& orientation);

/// Poses every Gaussian of the scene at state t using its part mask.
std::vector<PlanarGaussian> transform_scene(const ArticulatedScene& scene,
                                            double t);

/// Same as transform_scene with precomputed per-Gaussian masks.
std::vector<PlanarGaussian> transform_gaussians(
    const std::vector<PlanarGaussian>& gaussians,
    const std::vector<VectorXd>& masks, const std::vector<JointParams>& joints,
    double t);

}  // namespace artikin
