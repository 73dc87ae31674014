#include "splat4d/quat.hpp"

#include <cmath>

namespace splat4d {

Vec4 hamilton(const Vec4& a, const Vec4& b) {
    return Vec4(a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
                a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
                a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
                a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0]);
}

Eigen::Matrix4d hamilton_left_matrix(const Vec4& a) {
    Eigen::Matrix4d m;
    m << a[0], -a[1], -a[2], -a[3],
         a[1],  a[0], -a[3],  a[2],
         a[2],  a[3],  a[0], -a[1],
         a[3], -a[2],  a[1],  a[0];
    return m;
}

Eigen::Matrix4d hamilton_right_matrix(const Vec4& b) {
    Eigen::Matrix4d m;
    m << b[0], -b[1], -b[2], -b[3],
         b[1],  b[0],  b[3], -b[2],
         b[2], -b[3],  b[0],  b[1],
         b[3],  b[2], -b[1],  b[0];
    return m;
}

Vec4 normalize_quat_backward(const Vec4& u, const Vec4& d_y) {
    const double n = u.norm();
    const Vec4 y = u / n;
    return (d_y - y * y.dot(d_y)) / n;
}

std::array<Mat3, 4> rotation_from_quat_derivatives(const Vec4& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Mat3 dw, dx, dy, dz;
    dw << 0, -z, y, z, 0, -x, -y, x, 0;
    dx << 0, y, z, y, -2 * x, -w, z, w, -2 * x;
    dy << -2 * y, x, w, x, 0, z, -w, z, -2 * y;
    dz << -2 * z, -w, x, w, -2 * z, y, x, y, 0;
    return {2.0 * dw, 2.0 * dx, 2.0 * dy, 2.0 * dz};
}

Vec4 axis_angle_quat(const Vec3& omega) {
    const double theta = omega.norm();
    // s = sin(theta/2)/theta, even and analytic in theta
    double s;
    if (theta < 1e-6) {
        s = 0.5 - theta * theta / 48.0;
    } else {
        s = std::sin(0.5 * theta) / theta;
    }
    return Vec4(std::cos(0.5 * theta), s * omega.x(), s * omega.y(), s * omega.z());
}

Eigen::Matrix<double, 4, 3> axis_angle_quat_jacobian(const Vec3& omega) {
    const double theta = omega.norm();
    double s, ds_over_theta, dw_over_theta;
    if (theta < 1e-6) {
        // Taylor: s = 1/2 - t^2/48, s'(t)/t = -1/24 + t^2/960,
        //         w = cos(t/2), w'(t)/t = -1/4 + t^2/96
        s = 0.5 - theta * theta / 48.0;
        ds_over_theta = -1.0 / 24.0 + theta * theta / 960.0;
        dw_over_theta = -0.25 + theta * theta / 96.0;
    } else {
        s = std::sin(0.5 * theta) / theta;
        const double ds = 0.5 * std::cos(0.5 * theta) / theta -
                          std::sin(0.5 * theta) / (theta * theta);
        ds_over_theta = ds / theta;
        dw_over_theta = -0.5 * std::sin(0.5 * theta) / theta;
    }
    Eigen::Matrix<double, 4, 3> j;
    j.row(0) = (dw_over_theta * omega).transpose();
    j.block<3, 3>(1, 0) =
        s * Mat3::Identity() + ds_over_theta * omega * omega.transpose();
    return j;
}

Mat3 rotation_exp(const Vec3& omega) {
    const double theta = omega.norm();
    Mat3 k;
    k << 0, -omega.z(), omega.y(), omega.z(), 0, -omega.x(), -omega.y(), omega.x(), 0;
    double a, b;
    if (theta < 1e-6) {
        a = 1.0 - theta * theta / 6.0;
        b = 0.5 - theta * theta / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Mat3::Identity() + a * k + b * k * k;
}

Vec4 quat_from_rotation(const Mat3& r) {
    // Shepperd's method, picking the numerically largest pivot.
    const double tr = r.trace();
    Vec4 q;
    if (tr > 0.0) {
        double s = std::sqrt(tr + 1.0) * 2.0;
        q = Vec4(0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
                 (r(1, 0) - r(0, 1)) / s);
    } else if (r(0, 0) > r(1, 1) && r(0, 0) > r(2, 2)) {
        double s = std::sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
        q = Vec4((r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s,
                 (r(0, 2) + r(2, 0)) / s);
    } else if (r(1, 1) > r(2, 2)) {
        double s = std::sqrt(1.0 + r(1, 1) - r(0, 0) - r(2, 2)) * 2.0;
        q = Vec4((r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s,
                 (r(1, 2) + r(2, 1)) / s);
    } else {
        double s = std::sqrt(1.0 + r(2, 2) - r(0, 0) - r(1, 1)) * 2.0;
        q = Vec4((r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
                 (r(1, 2) + r(2, 1)) / s, 0.25 * s);
    }
    if (q[0] < 0.0) q = -q;
    return q / q.norm();
}

} // namespace splat4d
