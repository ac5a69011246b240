#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "artikin/kinematics.hpp"
#include "artikin/scene_io.hpp"
#include "artikin/types.hpp"

namespace artikin {

/// Gaussian sets observed at the start (t = 0) and end (t = 1) states.
struct TwoStateInput {
  std::vector<PlanarGaussian> gaussians_t0;
  std::vector<PlanarGaussian> gaussians_t1;
  double tau = 0.02;

  /// Throws InvariantError for an empty set or tau outside (0, 1).
  void validate() const;
};

/// Flags Gaussian i of `a` when its distance to the nearest center of `b`
/// exceeds tau times the largest such distance. Identical sets flag nothing.
std::vector<std::uint8_t> identify_dynamic(const std::vector<PlanarGaussian>& a,
                                           const std::vector<PlanarGaussian>& b,
                                           double tau);

/// Distance from every center of `a` to the nearest center of `b`.
std::vector<double> nearest_distances(const std::vector<PlanarGaussian>& a,
                                      const std::vector<PlanarGaussian>& b);

/// Part assignment of both states plus the state-0 to state-1 motion of each
/// part. Label 0 is the static part and its motion is the identity.
struct MotionPartition {
  std::vector<int> label_t0;
  std::vector<int> label_t1;
  std::vector<RigidTransform> motions;
};

struct CanonicalSet {
  std::vector<PlanarGaussian> gaussians;  ///< seg_logits left empty
  std::vector<int> source_t0;  ///< index into gaussians_t0 or -1
  std::vector<int> source_t1;  ///< index into gaussians_t1 or -1
  std::vector<int> label;      ///< part label taken from the partition
};

/// Canonical Gaussians as the mean of matched pairs. Static Gaussians pair by
/// mutual nearest neighbor. Each moving part pairs by Hungarian matching on
/// |M a - b| over at most `max_core` Gaussians per side; the remainder of
/// state 0 takes its nearest state-1 partner. Both sides of a pair are first
/// brought to the canonical pose with the half motion of their part. Gaussians
/// without a partner are carried over unaveraged (after the same half motion).
CanonicalSet build_canonical(const TwoStateInput& input, const MotionPartition& partition,
                             int max_core = 2048);

/// Convenience form: dynamic flags become label 1 with an identity motion.
CanonicalSet build_canonical(const TwoStateInput& input,
                             const std::vector<std::uint8_t>& dynamic_t0,
                             const std::vector<std::uint8_t>& dynamic_t1,
                             int max_core = 2048);

struct PartInit {
  PartModel model;
  std::vector<int> labels;
  std::vector<double> radii;
};

/// Static points (dynamic[i] == 0) form part 0; dynamic points are split into
/// k - 1 k-means clusters. Throws ContractError when k < 2 or there are fewer
/// dynamic points than moving parts.
PartInit cluster_parts(const std::vector<Vector3d>& centers,
                       const std::vector<std::uint8_t>& dynamic, int k,
                       std::uint64_t seed);

/// Part frames from hard labels: O_j the member mean, V_j = I and
/// Lambda_j = 1 / r_j with r_j the largest member distance. Parts without
/// members sit at the centroid of all points.
PartInit part_model_from_labels(const std::vector<Vector3d>& centers,
                                const std::vector<int>& labels, int k);

/// Sets every Gaussian's logits to `c` on its label and 0 elsewhere.
void assign_seg_logits(std::vector<PlanarGaussian>& gaussians,
                       const std::vector<int>& labels, int k, double c = 2.0);

/// Pivot seed for each part j >= 1: mean center of the boundary Gaussians
/// found among parts {0, j} alone; the part centroid when there is no
/// contact. Entry 0 is the origin.
std::vector<Vector3d> init_pivots(const std::vector<Vector3d>& centers,
                                  const std::vector<int>& labels, int k,
                                  int knn_k = 10, double beta = 0.2);

struct SplatOptions {
  int max_points = 0;  ///< evenly strided subsample above this count; 0 keeps all
  int neighbors = 4;   ///< spacing h is the mean distance to this many neighbors
  double opacity = 0.9;
};

/// One planar splat per point: shortest axis along the normal, scale
/// (h, h, h / 10). `colors` may be empty. Throws ContractError for fewer
/// than 100 points.
std::vector<PlanarGaussian> fit_state_gaussians(const OrientedPoints& cloud,
                                                const std::vector<Vector3d>& colors = {},
                                                const SplatOptions& opts = {});

struct InitOptions {
  int k = 2;
  std::uint64_t seed = 0;
  int knn_k = 10;
  double beta = 0.2;
  double temperature = 1.0;
  int max_core = 2048;
  /// Dynamic Gaussians must also move more than this multiple of the median
  /// displacement, which keeps sampling noise out of the dynamic set when
  /// tau * max is below the noise level. 0 disables the floor.
  double noise_floor = 3.0;
  /// Rounds of motion-consistent relabeling and re-registration after the
  /// threshold-based split; 0 keeps the plain midpoint canonical state.
  int refine_rounds = 2;
};

struct InitResult {
  ArticulatedScene scene;
  CanonicalSet canonical;
  MotionPartition partition;
  nlohmann::json report;
};

/// Full two-state initialization: dynamic identification, canonical state,
/// part clustering, per-part rigid registration, pivots and joint seeds.
/// Falls back to a motionless scene (identity joints) when nothing moves.
InitResult initialize(const TwoStateInput& input, const InitOptions& opts);

/// Joint seed reproducing `motion` as the state-0 to state-1 motion.
/// The pivot is `contact` projected onto the screw axis when there is a
/// rotation, `contact` itself otherwise.
JointParams joint_from_motion(const RigidTransform& motion, const Vector3d& contact);

}  // namespace artikin
