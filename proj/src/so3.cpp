#include "artikin/so3.hpp"

#include <algorithm>
#include <cmath>

namespace artikin::so3 {

Matrix3d hat(const Vector3d& w) {
  Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

Matrix3d exp(const Vector3d& w) {
  double th2 = w.squaredNorm();
  Matrix3d k = hat(w);
  if (th2 < 1e-16) return Matrix3d::Identity() + k + 0.5 * k * k;
  double th = std::sqrt(th2);
  return Matrix3d::Identity() + (std::sin(th) / th) * k +
         ((1.0 - std::cos(th)) / th2) * k * k;
}

Vector3d log(const Matrix3d& r) {
  Eigen::AngleAxisd aa(r);
  return aa.angle() * aa.axis();
}

Matrix3d left_jacobian(const Vector3d& w) {
  double th2 = w.squaredNorm();
  Matrix3d k = hat(w);
  if (th2 < 1e-10) return Matrix3d::Identity() + 0.5 * k + k * k / 6.0;
  double th = std::sqrt(th2);
  return Matrix3d::Identity() + ((1.0 - std::cos(th)) / th2) * k +
         ((th - std::sin(th)) / (th2 * th)) * k * k;
}

double angle_between(const Matrix3d& a, const Matrix3d& b) {
  Matrix3d rel = a.transpose() * b;
  // atan2 form stays accurate near 0 and pi.
  Vector3d v(rel(2, 1) - rel(1, 2), rel(0, 2) - rel(2, 0), rel(1, 0) - rel(0, 1));
  double s = 0.5 * v.norm();
  double c = 0.5 * (rel.trace() - 1.0);
  return std::atan2(s, std::clamp(c, -1.0, 1.0));
}

}  // namespace artikin::so3
