#include "artikin/registration.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "artikin/errors.hpp"
#include "artikin/so3.hpp"

namespace artikin {

namespace {

Vector3d centroid(const std::vector<Vector3d>& pts) {
  Vector3d c = Vector3d::Zero();
  for (const auto& p : pts) c += p;
  return pts.empty() ? c : Vector3d(c / static_cast<double>(pts.size()));
}

Matrix3d principal_axes(const std::vector<Vector3d>& pts, const Vector3d& c) {
  Matrix3d cov = Matrix3d::Zero();
  for (const auto& p : pts) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Matrix3d> eig(cov);
  Matrix3d axes = eig.eigenvectors();
  if (axes.determinant() < 0.0) axes.col(0) = -axes.col(0);
  return axes;
}

}  // namespace

RigidTransform kabsch(const std::vector<Vector3d>& src, const std::vector<Vector3d>& dst) {
  if (src.size() != dst.size() || src.empty())
    throw ContractError("kabsch needs two non-empty point lists of equal size");
  const Vector3d cs = centroid(src), cd = centroid(dst);
  Matrix3d h = Matrix3d::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) h += (src[i] - cs) * (dst[i] - cd).transpose();
  Eigen::JacobiSVD<Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix3d d = Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  RigidTransform tf;
  tf.rotation = svd.matrixV() * d * svd.matrixU().transpose();
  tf.translation = cd - tf.rotation * cs;
  return tf;
}

IcpResult icp(const std::vector<Vector3d>& src, const KdTree& dst,
              const RigidTransform& init, int iterations, double trim) {
  IcpResult res{init, 0.0};
  if (src.empty() || dst.size() == 0) return res;
  std::vector<std::pair<double, int>> dist(src.size());
  std::vector<Vector3d> a, b;
  double prev = std::numeric_limits<double>::infinity();
  const std::size_t keep =
      std::max<std::size_t>(3, static_cast<std::size_t>(src.size() * (1.0 - trim)));
  for (int it = 0; it <= iterations; ++it) {
    std::vector<int> nn(src.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
      Neighbor n = dst.nearest(res.transform.apply(src[i]));
      dist[i] = {n.sq_dist, static_cast<int>(i)};
      nn[i] = n.index;
    }
    std::sort(dist.begin(), dist.end());
    const std::size_t m = std::min(keep, src.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) sum += dist[i].first;
    res.rms = std::sqrt(sum / static_cast<double>(m));
    if (it == iterations || prev - res.rms < 1e-12) break;
    prev = res.rms;
    a.clear();
    b.clear();
    for (std::size_t i = 0; i < m; ++i) {
      a.push_back(src[dist[i].second]);
      b.push_back(dst.points()[nn[dist[i].second]]);
    }
    if (a.size() < 3) break;
    res.transform = kabsch(a, b);
  }
  return res;
}

RigidTransform register_rigid(const std::vector<Vector3d>& src,
                              const std::vector<Vector3d>& dst,
                              const std::vector<std::pair<int, int>>* pairs) {
  if (src.size() < 3 || dst.size() < 3)
    throw ContractError("register_rigid needs at least 3 points on each side");
  const Vector3d cs = centroid(src), cd = centroid(dst);
  std::vector<RigidTransform> starts;
  if (pairs != nullptr && pairs->size() >= 3) {
    std::vector<Vector3d> a, b;
    for (auto [i, j] : *pairs) {
      a.push_back(src.at(i));
      b.push_back(dst.at(j));
    }
    starts.push_back(kabsch(a, b));
  }
  starts.push_back({Matrix3d::Identity(), cd - cs});
  const Matrix3d as = principal_axes(src, cs), ad = principal_axes(dst, cd);
  const double flips[4][3] = {{1, 1, 1}, {-1, -1, 1}, {-1, 1, -1}, {1, -1, -1}};
  for (const auto& f : flips) {
    Matrix3d d = Vector3d(f[0], f[1], f[2]).asDiagonal();
    Matrix3d r = ad * d * as.transpose();
    starts.push_back({r, cd - r * cs});
  }

  KdTree tree(dst);
  std::vector<IcpResult> results;
  for (const auto& s : starts) results.push_back(icp(src, tree, s));
  double best = std::numeric_limits<double>::infinity();
  for (const auto& r : results) best = std::min(best, r.rms);
  // Symmetric shapes can fit equally well under several rotations; prefer
  // the smallest one among the near-best fits.
  int pick = -1;
  double pick_angle = 0.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (results[i].rms > best * 1.2 + 1e-9) continue;
    double ang = so3::log(results[i].transform.rotation).norm();
    if (pick < 0 || ang < pick_angle - 1e-9) {
      pick = static_cast<int>(i);
      pick_angle = ang;
    }
  }
  return results[pick].transform;
}

ScrewMotion decompose_screw(const RigidTransform& tf, double min_angle) {
  ScrewMotion s;
  Vector3d w = so3::log(tf.rotation);
  s.angle = w.norm();
  if (s.angle < min_angle) {
    s.angle = 0.0;
    s.shift = tf.translation;
    double n = tf.translation.norm();
    s.axis = n > 0.0 ? Vector3d(tf.translation / n) : Vector3d::UnitZ();
    s.slide = n;
    return s;
  }
  s.axis = w / s.angle;
  s.slide = s.axis.dot(tf.translation);
  // Point on the axis: solve (I - R) p = t_perp in the plane orthogonal to it.
  Vector3d t_perp = tf.translation - s.slide * s.axis;
  Matrix3d a = Matrix3d::Identity() - tf.rotation + s.axis * s.axis.transpose();
  s.point = a.colPivHouseholderQr().solve(t_perp);
  s.shift = tf.translation;
  return s;
}

RigidTransform half_motion(const RigidTransform& tf) {
  ScrewMotion s = decompose_screw(tf);
  if (s.angle == 0.0) return {Matrix3d::Identity(), 0.5 * tf.translation};
  RigidTransform h;
  h.rotation = so3::exp(0.5 * s.angle * s.axis);
  h.translation = s.point - h.rotation * s.point + 0.5 * s.slide * s.axis;
  return h;
}

}  // namespace artikin
