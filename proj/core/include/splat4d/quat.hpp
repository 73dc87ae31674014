#pragma once

#include <array>

#include "splat4d/scene.hpp"

namespace splat4d {

// Quaternions are (w, x, y, z) throughout.

inline const Vec4 kIdentityQuat{1.0, 0.0, 0.0, 0.0};

/// Hamilton product a (x) b.
Vec4 hamilton(const Vec4& a, const Vec4& b);

/// 4x4 matrices with a (x) b = left_matrix(a) * b = right_matrix(b) * a.
Eigen::Matrix4d hamilton_left_matrix(const Vec4& a);
Eigen::Matrix4d hamilton_right_matrix(const Vec4& b);

/// Adjoint of y = u / |u|.
Vec4 normalize_quat_backward(const Vec4& u, const Vec4& d_y);

/// d R(q) / d q_i for the unit-form rotation matrix.
std::array<Mat3, 4> rotation_from_quat_derivatives(const Vec4& q);

/// Unit quaternion for a rotation of |omega| radians about omega's axis.
Vec4 axis_angle_quat(const Vec3& omega);

/// Jacobian d axis_angle_quat / d omega (4x3), smooth through omega = 0.
Eigen::Matrix<double, 4, 3> axis_angle_quat_jacobian(const Vec3& omega);

/// Rotation matrix exp([omega]_x) via the Rodrigues form.
Mat3 rotation_exp(const Vec3& omega);

/// Quaternion of a rotation matrix (w >= 0 branch).
Vec4 quat_from_rotation(const Mat3& r);

} // namespace splat4d
