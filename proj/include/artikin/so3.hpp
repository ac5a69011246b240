#pragma once

#include "artikin/types.hpp"

namespace artikin::so3 {

Matrix3d hat(const Vector3d& w);
/// Rodrigues exponential of a rotation vector.
Matrix3d exp(const Vector3d& w);
/// Rotation vector of a rotation matrix, angle in [0, pi].
Vector3d log(const Matrix3d& r);
/// Left Jacobian: exp(w + d) ~= exp(J_l(w) d) exp(w).
Matrix3d left_jacobian(const Vector3d& w);
/// Geodesic angle between two rotations, radians.
double angle_between(const Matrix3d& a, const Matrix3d& b);

}  // namespace artikin::so3
