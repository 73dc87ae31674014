#include "splat4d/scene.hpp"

#include <cmath>
#include <string>

namespace splat4d {

void GaussianSet::validate() const {
    const int k = count();
    if (static_cast<int>(scale.size()) != k || static_cast<int>(quat.size()) != k ||
        static_cast<int>(opacity.size()) != k)
        throw ShapeError("GaussianSet: parameter arrays disagree on count");
    if (sh.rows() != k || sh.cols() != 3 * sh_coeff_count())
        throw ShapeError("GaussianSet: sh is " + std::to_string(sh.rows()) + "x" +
                         std::to_string(sh.cols()) + ", expected " + std::to_string(k) +
                         "x" + std::to_string(3 * sh_coeff_count()));
    if (embed.rows() != k)
        throw ShapeError("GaussianSet: embed row count != K");
    for (int i = 0; i < k; ++i) {
        if (std::abs(quat[i].norm() - 1.0) > 1e-6)
            throw DomainError("GaussianSet: quaternion " + std::to_string(i) +
                              " is not unit norm");
        if (!(scale[i].array() > 0.0).all())
            throw DomainError("GaussianSet: non-positive scale at " + std::to_string(i));
        if (opacity[i] < 0.0 || opacity[i] > 1.0)
            throw DomainError("GaussianSet: opacity out of [0,1] at " + std::to_string(i));
    }
}

GaussianSet GaussianSet::zeros(int k, int sh_degree, int embed_dim) {
    GaussianSet g;
    g.sh_degree = sh_degree;
    g.mu.assign(k, Vec3::Zero());
    g.scale.assign(k, Vec3::Ones());
    g.quat.assign(k, Vec4(1, 0, 0, 0));
    g.opacity.assign(k, 1.0);
    g.sh = Eigen::MatrixXd::Zero(k, 3 * g.sh_coeff_count());
    g.embed = Eigen::MatrixXd::Zero(k, embed_dim);
    return g;
}

void Camera::validate() const {
    if (width <= 0 || height <= 0)
        throw ShapeError("Camera: non-positive image size");
    const Mat3 rtr = rotation.transpose() * rotation;
    if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
        std::abs(rotation.determinant() - 1.0) > 1e-6)
        throw DomainError("Camera: rotation is not a proper rotation");
}

double gaussian_density(const Vec3& x, const Vec3& mu, const Mat3& cov) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
    const Vec3 ev = es.eigenvalues();
    if (!(ev.minCoeff() > 0.0) || ev.maxCoeff() / ev.minCoeff() > 1e12)
        throw NumericError("gaussian_density: degenerate covariance");
    const Vec3 d = x - mu;
    const double q = d.dot(cov.llt().solve(d));
    return std::exp(-0.5 * q);
}

Mat3 rotation_from_quat(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 r;
    r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return r;
}

Mat3 covariance_from_rotation_scale(const Vec4& q, const Vec3& s) {
    if (std::abs(q.norm() - 1.0) > 1e-6)
        throw DomainError("covariance_from_rotation_scale: quaternion must be "
                          "unit norm (normalize first)");
    if (!(s.array() > 0.0).all())
        throw DomainError("covariance_from_rotation_scale: scales must be positive");
    const Mat3 m = rotation_from_quat(q) * s.asDiagonal(); // M = R S
    return m * m.transpose();                              // Sigma = M M^T
}

void covariance_backward(const Vec4& q, const Vec3& s, const Mat3& d_cov,
                         Vec4& d_q, Vec3& d_s) {
    const Mat3 r = rotation_from_quat(q);
    const Mat3 m = r * s.asDiagonal();
    // Sigma = M M^T  =>  dM = (dSigma + dSigma^T) M
    const Mat3 d_m = (d_cov + d_cov.transpose()) * m;
    // M = R diag(s)
    const Mat3 rt_dm = r.transpose() * d_m;
    d_s += rt_dm.diagonal();
    const Mat3 d_r = d_m * s.asDiagonal();

    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 dw, dx, dy, dz;
    dw << 0, -z, y, z, 0, -x, -y, x, 0;
    dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    d_q[0] += 2.0 * d_r.cwiseProduct(dw).sum();
    d_q[1] += 2.0 * d_r.cwiseProduct(dx).sum();
    d_q[2] += 2.0 * d_r.cwiseProduct(dy).sum();
    d_q[3] += 2.0 * d_r.cwiseProduct(dz).sum();
}

std::optional<Projected2D> project_gaussian(const Vec3& mu, const Mat3& cov,
                                            const Camera& cam) {
    const Vec3 t = cam.rotation * mu + cam.translation;
    if (t.z() <= kNearPlane) return std::nullopt;

    const double inv_z = 1.0 / t.z();
    Projected2D out;
    out.depth = t.z();
    out.mu2d = Vec2(cam.fx * t.x() * inv_z + cam.cx, cam.fy * t.y() * inv_z + cam.cy);

    // Local affine Jacobian of the pinhole map, evaluated at the mean.
    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx * inv_z, 0, -cam.fx * t.x() * inv_z * inv_z,
        0, cam.fy * inv_z, -cam.fy * t.y() * inv_z * inv_z;

    const Mat3 v_cam = cam.rotation * cov * cam.rotation.transpose();
    out.cov2d = j * v_cam * j.transpose() + kLowPassPad * Mat2::Identity();
    return out;
}

void project_backward(const Vec3& mu, const Mat3& cov, const Camera& cam,
                      const Vec2& d_mu2d, const Mat2& d_cov2d,
                      Vec3& d_mu, Mat3& d_cov) {
    const Vec3 t = cam.rotation * mu + cam.translation;
    const double inv_z = 1.0 / t.z();
    const double inv_z2 = inv_z * inv_z;

    Eigen::Matrix<double, 2, 3> j;
    j << cam.fx * inv_z, 0, -cam.fx * t.x() * inv_z2,
        0, cam.fy * inv_z, -cam.fy * t.y() * inv_z2;
    const Mat3 v_cam = cam.rotation * cov * cam.rotation.transpose();

    // cov2d = J Vcam J^T + pad
    const Mat3 d_vcam = j.transpose() * d_cov2d * j;
    d_cov += cam.rotation.transpose() * d_vcam * cam.rotation;
    const Eigen::Matrix<double, 2, 3> d_j =
        (d_cov2d + d_cov2d.transpose()) * j * v_cam;

    // J's dependence on the camera-space mean t.
    Vec3 d_t = Vec3::Zero();
    d_t.x() += d_j(0, 2) * (-cam.fx * inv_z2);
    d_t.y() += d_j(1, 2) * (-cam.fy * inv_z2);
    d_t.z() += d_j(0, 0) * (-cam.fx * inv_z2) + d_j(1, 1) * (-cam.fy * inv_z2) +
               d_j(0, 2) * (2.0 * cam.fx * t.x() * inv_z2 * inv_z) +
               d_j(1, 2) * (2.0 * cam.fy * t.y() * inv_z2 * inv_z);

    // mu2d = (fx tx/tz + cx, fy ty/tz + cy): its Jacobian w.r.t. t is J itself.
    d_t += j.transpose() * d_mu2d;

    d_mu += cam.rotation.transpose() * d_t;
}

} // namespace splat4d
