#pragma once

#include <utility>
#include <vector>

#include "artikin/kinematics.hpp"
#include "artikin/spatial.hpp"

namespace artikin {

/// Least-squares rigid transform mapping src[i] onto dst[i] (Kabsch).
RigidTransform kabsch(const std::vector<Vector3d>& src, const std::vector<Vector3d>& dst);

struct IcpResult {
  RigidTransform transform;
  double rms = 0.0;  ///< over the kept (untrimmed) correspondences
};

/// Trimmed point-to-point ICP from `init`; each round drops the `trim`
/// fraction of worst correspondences.
IcpResult icp(const std::vector<Vector3d>& src, const KdTree& dst,
              const RigidTransform& init, int iterations = 40, double trim = 0.1);

/// Rigid registration of src onto dst from several starting hypotheses:
/// Kabsch over `pairs` (when given), the four proper principal-axis
/// alignments, and a pure centroid shift. Every hypothesis is refined by ICP;
/// among near-best residuals the smallest rotation wins.
RigidTransform register_rigid(const std::vector<Vector3d>& src,
                              const std::vector<Vector3d>& dst,
                              const std::vector<std::pair<int, int>>* pairs = nullptr);

/// Screw decomposition of a rigid motion: rotation `angle` (radians, >= 0)
/// about the line through `point` along `axis`, plus `slide` along `axis`.
/// Near-zero rotations report angle 0 and put the whole translation in
/// `shift`.
struct ScrewMotion {
  Vector3d axis = Vector3d::UnitZ();
  double angle = 0.0;
  Vector3d point = Vector3d::Zero();
  double slide = 0.0;
  Vector3d shift = Vector3d::Zero();  ///< full translation when angle == 0
};

ScrewMotion decompose_screw(const RigidTransform& tf, double min_angle = 1e-9);

/// The motion that applied twice gives `tf` (same screw, half the angle
/// and slide).
RigidTransform half_motion(const RigidTransform& tf);

}  // namespace artikin
