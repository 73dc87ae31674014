#include "splat4d/sh.hpp"

#include <string>

namespace splat4d {

namespace {
// Real SH basis constants (graphics convention).
constexpr double kC0 = 0.28209479177387814; // 1/(2 sqrt(pi))
constexpr double kC1 = 0.4886025119029199;  // sqrt(3/(4 pi))
constexpr double kC2a = 1.0925484305920792; // sqrt(15/(4 pi))
constexpr double kC2b = 0.31539156525252005; // sqrt(5/(16 pi))
constexpr double kC2c = 0.5462742152960396;  // sqrt(15/(16 pi))

void check_degree(int degree) {
    if (degree < 0 || degree > kMaxShDegree)
        throw ShapeError("sh: degree must be in [0," + std::to_string(kMaxShDegree) +
                         "], got " + std::to_string(degree));
}
} // namespace

void sh_basis(const Vec3& d, int degree, double* basis) {
    check_degree(degree);
    const double x = d.x(), y = d.y(), z = d.z();
    basis[0] = kC0;
    if (degree >= 1) {
        basis[1] = -kC1 * y;
        basis[2] = kC1 * z;
        basis[3] = -kC1 * x;
    }
    if (degree >= 2) {
        basis[4] = kC2a * x * y;
        basis[5] = -kC2a * y * z;
        basis[6] = kC2b * (2.0 * z * z - x * x - y * y);
        basis[7] = -kC2a * x * z;
        basis[8] = kC2c * (x * x - y * y);
    }
}

Vec3 sh_eval(const Eigen::Ref<const Eigen::RowVectorXd>& coeffs, const Vec3& d,
             int degree) {
    check_degree(degree);
    const int n = sh_basis_size(degree);
    if (coeffs.size() != 3 * n)
        throw ShapeError("sh_eval: expected " + std::to_string(3 * n) +
                         " coefficients, got " + std::to_string(coeffs.size()));
    double basis[9];
    sh_basis(d, degree, basis);
    Vec3 color = Vec3::Zero();
    for (int i = 0; i < n; ++i)
        for (int ch = 0; ch < 3; ++ch) color[ch] += coeffs[i * 3 + ch] * basis[i];
    return color;
}

void sh_eval_backward(const Eigen::Ref<const Eigen::RowVectorXd>& coeffs,
                      const Vec3& d, int degree, const Vec3& d_color,
                      Eigen::Ref<Eigen::RowVectorXd> d_coeffs, Vec3& d_dir) {
    check_degree(degree);
    const int n = sh_basis_size(degree);
    if (coeffs.size() != 3 * n || d_coeffs.size() != 3 * n)
        throw ShapeError("sh_eval_backward: coefficient size mismatch");
    double basis[9];
    sh_basis(d, degree, basis);

    const double x = d.x(), y = d.y(), z = d.z();
    // dbasis_i / d(x,y,z)
    Vec3 db[9];
    db[0] = Vec3::Zero();
    if (degree >= 1) {
        db[1] = Vec3(0, -kC1, 0);
        db[2] = Vec3(0, 0, kC1);
        db[3] = Vec3(-kC1, 0, 0);
    }
    if (degree >= 2) {
        db[4] = kC2a * Vec3(y, x, 0);
        db[5] = -kC2a * Vec3(0, z, y);
        db[6] = kC2b * Vec3(-2 * x, -2 * y, 4 * z);
        db[7] = -kC2a * Vec3(z, 0, x);
        db[8] = kC2c * Vec3(2 * x, -2 * y, 0);
    }

    for (int i = 0; i < n; ++i) {
        double w = 0.0;
        for (int ch = 0; ch < 3; ++ch) {
            d_coeffs[i * 3 + ch] += basis[i] * d_color[ch];
            w += coeffs[i * 3 + ch] * d_color[ch];
        }
        d_dir += w * db[i];
    }
}

} // namespace splat4d
