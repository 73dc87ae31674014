#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "splat4d/errors.hpp"

namespace splat4d {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

/// A set of anisotropic 3D Gaussians with per-Gaussian latent embeddings.
///
/// Quaternions are stored (w, x, y, z). SH coefficients are stored per
/// Gaussian as a flat row of length 3*(L+1)^2, coefficient-major:
/// [c0.r, c0.g, c0.b, c1.r, ...] with coefficients ordered (l, m) =
/// (0,0), (1,-1), (1,0), (1,1), (2,-2), ...
struct GaussianSet {
    int sh_degree = 0;
    std::vector<Vec3> mu;
    std::vector<Vec3> scale;
    std::vector<Vec4> quat;
    std::vector<double> opacity;
    Eigen::MatrixXd sh;     // K x 3*(L+1)^2
    Eigen::MatrixXd embed;  // K x D_g

    int count() const { return static_cast<int>(mu.size()); }
    int sh_coeff_count() const { return (sh_degree + 1) * (sh_degree + 1); }

    /// Throws if any invariant is violated: unit quaternions (1e-6),
    /// strictly positive scales, opacities in [0,1], consistent row counts.
    void validate() const;

    static GaussianSet zeros(int k, int sh_degree, int embed_dim);
};

/// Pinhole camera with a rigid world-to-camera transform (x_cam = R x + t).
struct Camera {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    void validate() const;
    Vec3 position() const { return -rotation.transpose() * translation; }
};

/// Screen-space footprint of one projected Gaussian.
struct Projected2D {
    Vec2 mu2d;    // pixels
    Mat2 cov2d;   // pixels^2, includes the low-pass pad
    double depth; // camera-space z
};

inline constexpr double kNearPlane = 0.01;
inline constexpr double kLowPassPad = 0.3; // px^2 added to cov2d diagonal

/// exp(-1/2 (x-mu)^T cov^-1 (x-mu)).  Throws NumericError when cov is
/// numerically singular (condition number above ~1e12).
double gaussian_density(const Vec3& x, const Vec3& mu, const Mat3& cov);

/// Sigma = R(q) S S^T R(q)^T with S = diag(s).  Requires |q| = 1 within 1e-6.
Mat3 covariance_from_rotation_scale(const Vec4& q, const Vec3& s);

/// Rotation matrix from a (w,x,y,z) quaternion, using the unit-norm form.
Mat3 rotation_from_quat(const Vec4& q);

/// Adjoint of covariance_from_rotation_scale: given dL/dSigma (symmetric),
/// accumulate dL/dq and dL/ds.
void covariance_backward(const Vec4& q, const Vec3& s, const Mat3& d_cov,
                         Vec4& d_q, Vec3& d_s);

/// Perspective projection of one Gaussian.  Returns nullopt when the mean
/// is at or behind the near plane (culled).
std::optional<Projected2D> project_gaussian(const Vec3& mu, const Mat3& cov,
                                            const Camera& cam);

/// Adjoint of project_gaussian.  d_cov2d must be symmetric.  Accumulates
/// dL/dmu and dL/dcov (world covariance).  Depth carries no gradient
/// (the compositing order is treated as piecewise constant).
void project_backward(const Vec3& mu, const Mat3& cov, const Camera& cam,
                      const Vec2& d_mu2d, const Mat2& d_cov2d,
                      Vec3& d_mu, Mat3& d_cov);

} // namespace splat4d
