#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <json.hpp>

#include "artikin/synth.hpp"
#include "artikin/types.hpp"

namespace artikin {

/// Angle between two axis lines in degrees; sign-agnostic.
double axis_angle_error(const Vector3d& pred, const Vector3d& gt);

/// Minimum distance between two infinite lines, in centimeters (x100).
double axis_pos_error(const Vector3d& pred_axis, const Vector3d& pred_point,
                      const Vector3d& gt_axis, const Vector3d& gt_point);

struct MotionError {
  double rot_deg = 0.0;
  double trans = 0.0;
};

/// Geodesic error between the predicted state-0 to state-1 rotation (2 theta
/// about the axis) and the true one, plus |2 t_pred - t_gt|.
MotionError part_motion_error(const JointParams& pred, const GroundTruthJoint& gt);

/// Mean of the two directed mean squared nearest-neighbor distances, x 1000.
double chamfer_x1000(const std::vector<Vector3d>& a, const std::vector<Vector3d>& b);

/// Fraction of labels that agree after the best one-to-one relabeling of
/// `pred` (Hungarian on the confusion matrix). Labels must lie in [0, k).
double label_agreement(const std::vector<int>& pred, const std::vector<int>& truth, int k);

/// Predicted part matched to each ground-truth part (entry 0 is 0). Movable
/// parts are matched by the mean disagreement of their state-0 to state-1
/// motions over `points` of each true part.
std::vector<int> match_parts(const std::vector<JointParams>& joints, const GroundTruth& gt,
                             const std::vector<Vector3d>& points);

struct JointReport {
  int part = 0;     ///< predicted part
  int gt_part = 0;  ///< ground-truth part
  JointKind kind = JointKind::Revolute;
  double axis_ang = 0.0;
  std::optional<double> axis_pos_cm;  ///< not defined for prismatic joints
  MotionError motion;
  /// Prismatic only: angle between predicted and true slide directions and
  /// the magnitude error.
  double trans_dir_deg = 0.0;
  double trans_mag_err = 0.0;
  double theta_total_deg = 0.0;  ///< predicted total rotation (2 theta)
};

struct MetricReport {
  std::vector<JointReport> joints;
  std::optional<double> cd_s, cd_m, cd_w;

  nlohmann::json to_json() const;
};

/// Joint metrics for every ground-truth joint. When `truth_points` (state 0,
/// aligned with gt.labels) is given, also the Chamfer terms between the
/// predicted Gaussians posed at t = 0 and the true state-0 parts.
MetricReport evaluate(const ArticulatedScene& scene, const GroundTruth& gt,
                      const std::vector<Vector3d>* truth_points = nullptr);

}  // namespace artikin
