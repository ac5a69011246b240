#include "artikin/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include "artikin/cluster.hpp"
#include "artikin/errors.hpp"
#include "artikin/spatial.hpp"

namespace artikin {

namespace {

constexpr double kProbFloor = 1e-8;

double floored(double p) { return std::max(p, kProbFloor); }

VectorXd softmax(const VectorXd& s) {
  VectorXd e = (s.array() - s.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

VectorXd mahalanobis(const PartModel& part_model, const Vector3d& mu) {
  const int k = part_model.size();
  VectorXd gamma(k);
  for (int j = 0; j < k; ++j) {
    Vector3d l = part_model.scales[j].cwiseProduct(
        part_model.orientations[j] * (mu - part_model.centers[j]));
    gamma[j] = l.squaredNorm();
  }
  return gamma;
}

PartMask part_mask(const VectorXd& gamma, const VectorXd& logits,
                   double temperature) {
  if (gamma.size() != logits.size())
    throw ContractError("part_mask: gamma and logits differ in length");
  if (!(temperature > 0.0)) throw ContractError("part_mask: temperature must be > 0");
  return softmax((logits - gamma) / temperature);
}

std::vector<PartMask> scene_masks(const ArticulatedScene& scene) {
  std::vector<PartMask> masks;
  masks.reserve(scene.gaussians.size());
  for (const auto& g : scene.gaussians)
    masks.push_back(part_mask(mahalanobis(scene.part_model, g.center),
                              g.seg_logits, scene.temperature));
  return masks;
}

std::vector<int> argmax_labels(const std::vector<PartMask>& masks) {
  std::vector<int> labels(masks.size(), 0);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    Eigen::Index arg = 0;
    masks[i].maxCoeff(&arg);
    labels[i] = static_cast<int>(arg);
  }
  return labels;
}

std::vector<int> boundary_indices(const std::vector<Vector3d>& centers,
                                  const std::vector<int>& labels, int knn_k,
                                  double beta) {
  if (knn_k < 1) throw ContractError("detect_boundary: knn_k must be >= 1");
  if (static_cast<int>(centers.size()) < knn_k + 1)
    throw ContractError("detect_boundary: need at least knn_k + 1 Gaussians");
  KdTree tree(centers);
  std::vector<int> out;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    auto nn = tree.knn(centers[i], knn_k, static_cast<int>(i));
    int differing = 0;
    for (const auto& n : nn)
      if (labels[n.index] != labels[i]) ++differing;
    if (static_cast<double>(differing) / knn_k >= beta)
      out.push_back(static_cast<int>(i));
  }
  return out;
}

BoundarySet detect_boundary(const ArticulatedScene& scene, int knn_k,
                            double beta) {
  BoundarySet b;
  b.indices = boundary_indices(centers_of(scene.gaussians),
                               argmax_labels(scene_masks(scene)), knn_k, beta);
  return b;
}

void vote_regions(BoundarySet& boundary, const std::vector<Vector3d>& centers,
                  int k, std::uint64_t seed) {
  boundary.region.clear();
  boundary.center_dist.clear();
  boundary.region_centers.clear();
  const int n = static_cast<int>(boundary.indices.size());
  if (n == 0) return;
  std::vector<Vector3d> pts;
  pts.reserve(n);
  for (int idx : boundary.indices) pts.push_back(centers[idx]);

  if (n <= 4 * k) {
    for (int i = 0; i < n; ++i) boundary.region.push_back(i);
    boundary.region_centers = pts;
  } else {
    KMeansResult km = kmeans(pts, 4 * k, seed, 50);
    boundary.region = km.labels;
    boundary.region_centers = km.centers;
  }
  for (int i = 0; i < n; ++i)
    boundary.center_dist.push_back(
        (pts[i] - boundary.region_centers[boundary.region[i]]).norm());
}

PartMask vote_distribution(const std::vector<PartMask>& members,
                           const std::vector<double>& center_dist) {
  if (members.empty()) throw ContractError("vote_distribution: empty region");
  VectorXd neg(members.size());
  for (std::size_t i = 0; i < members.size(); ++i) neg[i] = -center_dist[i];
  VectorXd w = softmax(neg);
  PartMask vote = PartMask::Zero(members.front().size());
  for (std::size_t i = 0; i < members.size(); ++i) vote += w[i] * members[i];
  return vote / vote.sum();
}

double kl_divergence(const VectorXd& p, const VectorXd& q) {
  double kl = 0.0;
  for (Eigen::Index c = 0; c < p.size(); ++c)
    kl += p[c] * (std::log(floored(p[c])) - std::log(floored(q[c])));
  return kl;
}

double vote_loss(const BoundarySet& boundary, const std::vector<PartMask>& masks,
                 std::vector<VectorXd>* grad) {
  if (grad != nullptr) {
    grad->assign(masks.size(), VectorXd());
    for (std::size_t i = 0; i < masks.size(); ++i)
      (*grad)[i] = VectorXd::Zero(masks[i].size());
  }
  const int regions = boundary.region_count();
  if (boundary.empty() || regions == 0) return 0.0;

  std::vector<std::vector<int>> members(regions);
  for (std::size_t m = 0; m < boundary.indices.size(); ++m)
    members[boundary.region[m]].push_back(static_cast<int>(m));

  double total = 0.0;
  int used = 0;
  for (int r = 0; r < regions; ++r) {
    if (members[r].empty()) continue;
    ++used;
    std::vector<PartMask> region_masks;
    std::vector<double> dist;
    for (int m : members[r]) {
      region_masks.push_back(masks[boundary.indices[m]]);
      dist.push_back(boundary.center_dist[m]);
    }
    VectorXd neg(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) neg[i] = -dist[i];
    VectorXd w = softmax(neg);
    VectorXd raw = VectorXd::Zero(region_masks.front().size());
    for (std::size_t i = 0; i < region_masks.size(); ++i) raw += w[i] * region_masks[i];
    double norm = raw.sum();
    VectorXd vote = raw / norm;

    const double n = static_cast<double>(members[r].size());
    double region_sum = 0.0;
    VectorXd d_vote = VectorXd::Zero(vote.size());
    for (std::size_t i = 0; i < region_masks.size(); ++i) {
      region_sum += kl_divergence(vote, region_masks[i]);
      if (grad == nullptr) continue;
      VectorXd& g = (*grad)[boundary.indices[members[r][i]]];
      for (Eigen::Index c = 0; c < vote.size(); ++c) {
        double q = region_masks[i][c];
        if (q > kProbFloor) g[c] -= vote[c] / q / n;
        d_vote[c] += (std::log(floored(vote[c])) - std::log(floored(q)) +
                      (vote[c] > kProbFloor ? 1.0 : 0.0)) /
                     n;
      }
    }
    total += region_sum / n;
    if (grad != nullptr) {
      // The normalizer is 1 for masks on the simplex; its derivative lies
      // along (1, ..., 1), which the mask softmax annihilates.
      for (std::size_t i = 0; i < region_masks.size(); ++i)
        (*grad)[boundary.indices[members[r][i]]] += (w[i] / norm) * d_vote;
    }
  }
  if (grad != nullptr)
    for (auto& g : *grad) g /= static_cast<double>(used);
  return total / used;
}

}  // namespace artikin
