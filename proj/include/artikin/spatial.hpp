#pragma once

#include <cstdint>
#include <vector>

#include "artikin/types.hpp"

namespace artikin {

struct Neighbor {
  int index = -1;
  double sq_dist = 0.0;
};

/// Static 3-d tree over a point set for exact nearest-neighbor queries.
/// Equal distances resolve to the lower point index, so results do not depend
/// on the tree layout.
class KdTree {
 public:
  KdTree() = default;
  explicit KdTree(std::vector<Vector3d> points);

  std::size_t size() const { return points_.size(); }
  const std::vector<Vector3d>& points() const { return points_; }

  Neighbor nearest(const Vector3d& q) const;
  /// The k nearest points sorted by (distance, index). `skip` excludes one
  /// index, typically the query point itself.
  std::vector<Neighbor> knn(const Vector3d& q, int k, int skip = -1) const;

 private:
  struct Node {
    int begin = 0, end = 0;  // range in order_ for leaves
    int left = -1, right = -1;
    int dim = 0;
    double split = 0.0;
  };
  int build(int begin, int end);
  void search(int node, const Vector3d& q, int k, int skip,
              std::vector<Neighbor>& heap) const;

  std::vector<Vector3d> points_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Mean over `from` of the squared distance to the nearest point of `to`.
double mean_nn_sq_distance(const std::vector<Vector3d>& from, const KdTree& to);

/// Symmetric Chamfer distance: average of the two directional mean squared
/// nearest-neighbor distances.
double chamfer_sq(const std::vector<Vector3d>& a, const std::vector<Vector3d>& b);

std::vector<Vector3d> centers_of(const std::vector<PlanarGaussian>& gaussians);

}  // namespace artikin
