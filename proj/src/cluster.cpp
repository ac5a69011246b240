#include "artikin/cluster.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "artikin/errors.hpp"

namespace artikin {

namespace {

KMeansResult kmeans_once(const std::vector<Vector3d>& pts, int k,
                         std::mt19937_64& rng, int max_iterations) {
  const int n = static_cast<int>(pts.size());
  KMeansResult res;
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  // k-means++ seeding
  res.centers.push_back(pts[std::min(n - 1, static_cast<int>(unit(rng) * n))]);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(res.centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (pts[i] - res.centers.back()).squaredNorm());
      total += d2[i];
    }
    int pick = n - 1;
    if (total > 0.0) {
      double r = unit(rng) * total;
      for (int i = 0; i < n; ++i) {
        r -= d2[i];
        if (r <= 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(res.centers.size()) % n;
    }
    res.centers.push_back(pts[pick]);
  }

  res.labels.assign(n, 0);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = it == 0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        double d = (pts[i] - res.centers[c]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (res.labels[i] != best) changed = true;
      res.labels[i] = best;
    }
    std::vector<Vector3d> sum(k, Vector3d::Zero());
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
      sum[res.labels[i]] += pts[i];
      ++count[res.labels[i]];
    }
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) {
        res.centers[c] = sum[c] / count[c];
        continue;
      }
      int worst = 0;
      double wd = -1.0;
      for (int i = 0; i < n; ++i) {
        double d = (pts[i] - res.centers[res.labels[i]]).squaredNorm();
        if (d > wd) {
          wd = d;
          worst = i;
        }
      }
      res.centers[c] = pts[worst];
      res.labels[worst] = c;
      changed = true;
    }
    if (!changed) break;
  }
  res.inertia = 0.0;
  for (int i = 0; i < n; ++i)
    res.inertia += (pts[i] - res.centers[res.labels[i]]).squaredNorm();
  return res;
}

}  // namespace

KMeansResult kmeans(const std::vector<Vector3d>& points, int clusters,
                    std::uint64_t seed, int max_iterations, int restarts) {
  if (points.empty()) throw ContractError("k-means on an empty point set");
  if (clusters < 1) throw ContractError("k-means needs at least one cluster");
  int k = std::min<int>(clusters, static_cast<int>(points.size()));
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    KMeansResult cur = kmeans_once(points, k, rng, max_iterations);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

std::vector<int> hungarian_match(const Eigen::MatrixXd& costs) {
  if (costs.rows() != costs.cols())
    throw ContractError("hungarian_match needs a square cost matrix");
  if (!costs.allFinite()) throw ContractError("hungarian_match: non-finite cost");
  const int n = static_cast<int>(costs.rows());
  if (n == 0) return {};
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials over rows (u) and columns (v); way[] stores the
  // augmenting path, match[j] the row owning column j.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = match[j0], j1 = 0;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = costs(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> perm(n, -1);
  for (int j = 1; j <= n; ++j) perm[match[j] - 1] = j - 1;
  return perm;
}

double assignment_cost(const Eigen::MatrixXd& costs, const std::vector<int>& perm) {
  double s = 0.0;
  for (std::size_t i = 0; i < perm.size(); ++i) s += costs(i, perm[i]);
  return s;
}

}  // namespace artikin
