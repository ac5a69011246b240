#pragma once

#include <cstdint>
#include <vector>

#include "artikin/types.hpp"

namespace artikin {

/// Probability vector over the k parts.
using PartMask = VectorXd;

/// Squared Mahalanobis distance of `mu` to every part frame:
/// gamma_j = |diag(scale_j) * V_j * (mu - O_j)|^2.
VectorXd mahalanobis(const PartModel& part_model, const Vector3d& mu);

/// softmax((-gamma + logits) / temperature).
PartMask part_mask(const VectorXd& gamma, const VectorXd& logits,
                   double temperature);

std::vector<PartMask> scene_masks(const ArticulatedScene& scene);

/// Argmax part of each mask; ties go to the lowest part index.
std::vector<int> argmax_labels(const std::vector<PartMask>& masks);

/// Boundary Gaussians and their local voting regions.
struct BoundarySet {
  std::vector<int> indices;          ///< Gaussian indices
  std::vector<int> region;           ///< region id per entry of `indices`
  std::vector<double> center_dist;   ///< distance to the region center
  std::vector<Vector3d> region_centers;

  int region_count() const { return static_cast<int>(region_centers.size()); }
  bool empty() const { return indices.empty(); }
};

/// Flags point i when at least a `beta` fraction of its `knn_k` nearest
/// neighbors carry a different label. Throws ContractError when there are
/// fewer than knn_k + 1 points.
std::vector<int> boundary_indices(const std::vector<Vector3d>& centers,
                                  const std::vector<int>& labels, int knn_k,
                                  double beta);

/// Boundary detection on the scene's canonical centers and argmax labels.
BoundarySet detect_boundary(const ArticulatedScene& scene, int knn_k, double beta);

/// Splits the boundary Gaussians into min(4k, |boundary|) regions with
/// k-means (k-means++ seeding, 50 iterations) and records each member's
/// distance to its region center.
void vote_regions(BoundarySet& boundary, const std::vector<Vector3d>& centers,
                  int k, std::uint64_t seed);

/// Region vote: sum_i softmax(-delta)_i * M_i, renormalized onto the simplex.
PartMask vote_distribution(const std::vector<PartMask>& members,
                           const std::vector<double>& center_dist);

/// KL(p || q) with both distributions floored at 1e-8 inside the logs.
double kl_divergence(const VectorXd& p, const VectorXd& q);

/// Mean over regions of the mean member divergence KL(M_vote || M_i).
/// When `grad` is non-null it receives dL/dM for every Gaussian (sized like
/// `masks`, zero outside the boundary). Member weights are treated as fixed;
/// the vote itself is differentiated through.
double vote_loss(const BoundarySet& boundary, const std::vector<PartMask>& masks,
                 std::vector<VectorXd>* grad = nullptr);

}  // namespace artikin
