#pragma once

#include <cstdint>
#include <vector>

#include "artikin/types.hpp"

namespace artikin {

struct KMeansResult {
  std::vector<int> labels;
  std::vector<Vector3d> centers;
  double inertia = 0.0;  ///< sum of squared distances to assigned centers
};

/// Lloyd's k-means with k-means++ seeding. Deterministic for a given seed;
/// with `restarts` > 1 the lowest-inertia run wins. Clusters never end up
/// empty: an emptied cluster is re-seeded at the worst-fit point.
KMeansResult kmeans(const std::vector<Vector3d>& points, int clusters,
                    std::uint64_t seed, int max_iterations = 50,
                    int restarts = 1);

/// Optimal assignment for a square cost matrix (shortest augmenting path
/// Hungarian method, O(n^3)). Returns perm with row i assigned to column
/// perm[i]. Throws ContractError for non-square or non-finite input.
std::vector<int> hungarian_match(const Eigen::MatrixXd& costs);

double assignment_cost(const Eigen::MatrixXd& costs, const std::vector<int>& perm);

}  // namespace artikin
