#pragma once

#include <Eigen/Dense>

#include "splat4d/scene.hpp"

namespace splat4d {

// Real spherical harmonics, graphics convention, degrees 0..2.

inline constexpr int kMaxShDegree = 2;

/// Number of basis functions for degree L.
inline int sh_basis_size(int degree) { return (degree + 1) * (degree + 1); }

/// Fill basis[0..(L+1)^2) with Y_{l,m}(d) for a unit direction d.
void sh_basis(const Vec3& d, int degree, double* basis);

/// Color = sum_l sum_m k_{l,m} Y_{l,m}(d) per channel.
/// coeffs is a flat row of length 3*(L+1)^2, coefficient-major (see GaussianSet).
/// Throws ShapeError when the coefficient count does not match the degree.
Vec3 sh_eval(const Eigen::Ref<const Eigen::RowVectorXd>& coeffs, const Vec3& d,
             int degree);

/// Adjoint of sh_eval: accumulates dL/dcoeffs and dL/dd (direction gradient,
/// before any normalization chain the caller owns).
void sh_eval_backward(const Eigen::Ref<const Eigen::RowVectorXd>& coeffs,
                      const Vec3& d, int degree, const Vec3& d_color,
                      Eigen::Ref<Eigen::RowVectorXd> d_coeffs, Vec3& d_dir);

} // namespace splat4d
