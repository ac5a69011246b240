#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "artikin/init.hpp"
#include "artikin/kinematics.hpp"

namespace artikin {

enum class JointKind { Revolute, Prismatic, Screw };

std::string to_string(JointKind kind);
JointKind joint_kind_from_string(const std::string& s);

struct GroundTruthJoint {
  JointKind kind = JointKind::Revolute;
  Vector3d axis = Vector3d::UnitZ();
  Vector3d pivot = Vector3d::Zero();
  double rotation_deg = 0.0;                    ///< total, state 0 to state 1
  Vector3d translation = Vector3d::Zero();      ///< total, state 0 to state 1

  /// State-0 to state-1 motion of the part.
  RigidTransform motion() const;
};

struct GroundTruth {
  std::vector<GroundTruthJoint> joints;  ///< one per movable part (part j = index + 1)
  std::vector<int> labels;               ///< true part of every state Gaussian

  /// Throws InvariantError: axis not unit, revolute with translation,
  /// prismatic with rotation.
  void validate() const;
  nlohmann::json to_json() const;
  static GroundTruth from_json(const nlohmann::json& j);
};

struct SceneSpec {
  std::string kind = "hinge";  ///< hinge | drawer | screw | cabinet
  int k = 2;                   ///< must match the kind (cabinet: 4, others: 2)
  double theta_total_deg = 60.0;
  double translation = 0.3;    ///< drawer slide or screw rise
  double noise = 1e-3;
  int n_gaussians = 2000;
  std::uint64_t seed = 0;

  static SceneSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SynthScene {
  TwoStateInput input;
  GroundTruth truth;
  OrientedPoints cloud_t0, cloud_t1;
  std::vector<Vector3d> colors;
};

/// Samples oriented points on a box/panel assembly, poses them at both states
/// with the ground-truth joints, adds isotropic position noise per state and
/// builds splats with fit_state_gaussians. Throws ParseError for an unknown
/// kind or a k that does not match it.
SynthScene make_scene(const SceneSpec& spec);

}  // namespace artikin
