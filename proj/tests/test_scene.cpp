#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "splat4d/quat.hpp"
#include "splat4d/scene.hpp"
#include "splat4d/sh.hpp"
#include "test_util.hpp"

using namespace splat4d;

TEST_CASE("gaussian_density at the mean is exactly one") {
    Mat3 cov;
    cov << 2, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0;
    const Vec3 mu(0.4, -0.2, 1.0);
    CHECK(gaussian_density(mu, mu, cov) == 1.0);
}

TEST_CASE("gaussian_density identity covariance, unit offset") {
    const Vec3 mu(0, 0, 0);
    const double v = gaussian_density(Vec3(1, 0, 0), mu, Mat3::Identity());
    CHECK(v == doctest::Approx(std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("gaussian_density anisotropic case matches the scalar oracle") {
    // diag(4,1,1), offset (2,0,0): exponent = -0.5 * 2^2/4 = -0.5
    const Mat3 cov = Vec3(4, 1, 1).asDiagonal();
    const double v = gaussian_density(Vec3(2, 0, 0), Vec3::Zero(), cov);
    CHECK(v == doctest::Approx(0.6065306597126334).epsilon(1e-12));
}

TEST_CASE("gaussian_density rejects a singular covariance") {
    Mat3 cov = Mat3::Zero();
    cov(0, 0) = 1.0;
    cov(1, 1) = 1.0; // rank 2
    CHECK_THROWS_AS(gaussian_density(Vec3(1, 1, 1), Vec3::Zero(), cov), NumericError);
}

TEST_CASE("gaussian_density is invariant under joint rotation") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const Vec4 q = testutil::random_unit_quat(rng);
        const Mat3 r = rotation_from_quat(q);
        const Vec3 s(0.5 + std::abs(u(rng)), 0.5 + std::abs(u(rng)),
                     0.5 + std::abs(u(rng)));
        const Mat3 cov = covariance_from_rotation_scale(testutil::random_unit_quat(rng), s);
        const Vec3 x(u(rng), u(rng), u(rng));
        const double base = gaussian_density(x, Vec3::Zero(), cov);
        const double rotated =
            gaussian_density(r * x, Vec3::Zero(), r * cov * r.transpose());
        CHECK(rotated == doctest::Approx(base).epsilon(1e-9));
    }
}

TEST_CASE("covariance_from_rotation_scale with identity rotation") {
    const Mat3 cov = covariance_from_rotation_scale(Vec4(1, 0, 0, 0), Vec3(1, 2, 3));
    CHECK((cov - Vec3(1, 4, 9).asDiagonal().toDenseMatrix()).norm() < 1e-14);
}

TEST_CASE("covariance_from_rotation_scale 90 degrees about z (matrix oracle)") {
    const double c = std::cos(M_PI / 4), s = std::sin(M_PI / 4);
    const Vec4 q(c, 0, 0, s);
    const Mat3 cov = covariance_from_rotation_scale(q, Vec3(2, 1, 1));
    // oracle: R diag(4,1,1) R^T with R = rot_z(90deg)
    Mat3 r;
    r << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    const Mat3 expected = r * Vec3(4, 1, 1).asDiagonal() * r.transpose();
    CHECK((cov - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((cov - Vec3(1, 4, 1).asDiagonal().toDenseMatrix()).cwiseAbs().maxCoeff() <
          1e-12);
}

TEST_CASE("covariance is symmetric PSD for random inputs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.05, 2.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec4 q = testutil::random_unit_quat(rng);
        const Vec3 s(u(rng), u(rng), u(rng));
        const Mat3 cov = covariance_from_rotation_scale(q, s);
        CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
        CHECK(es.eigenvalues().minCoeff() > -1e-12);
    }
}

TEST_CASE("covariance_from_rotation_scale rejects non-unit quaternions") {
    CHECK_THROWS_AS(covariance_from_rotation_scale(Vec4(1.1, 0, 0, 0), Vec3(1, 1, 1)),
                    DomainError);
}

TEST_CASE("covariance_backward matches finite differences") {
    std::mt19937_64 rng(3);
    Vec4 q = testutil::random_unit_quat(rng);
    Vec3 s(0.7, 1.3, 0.4);
    Mat3 d_cov;
    d_cov << 0.3, -0.2, 0.1, -0.2, 0.5, 0.05, 0.1, 0.05, -0.4; // symmetric seed
    const auto loss = [&]() {
        return (covariance_from_rotation_scale(q / q.norm(), s).cwiseProduct(d_cov))
            .sum();
    };
    // analytic (treating q as raw coordinates of the normalized input)
    Vec4 d_q = Vec4::Zero();
    Vec3 d_s = Vec3::Zero();
    covariance_backward(q, s, d_cov, d_q, d_s);
    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
        const double saved = s[i];
        s[i] = saved + h;
        const double fp = loss();
        s[i] = saved - h;
        const double fm = loss();
        s[i] = saved;
        CHECK(d_s[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
    }
    // quaternion path: compare against the raw (unnormalized) formula instead
    const auto raw_loss = [&]() {
        const Mat3 m = rotation_from_quat(q) * s.asDiagonal();
        return ((m * m.transpose()).cwiseProduct(d_cov)).sum();
    };
    for (int i = 0; i < 4; ++i) {
        const double saved = q[i];
        q[i] = saved + h;
        const double fp = raw_loss();
        q[i] = saved - h;
        const double fm = raw_loss();
        q[i] = saved;
        CHECK(d_q[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("sh_eval degree 0 is constant in direction") {
    Eigen::RowVectorXd coeffs(3);
    coeffs << 2.0, -1.0, 0.5;
    for (const Vec3& d : {Vec3(0, 0, 1), Vec3(1, 0, 0).normalized(),
                          Vec3(1, 1, 1).normalized()}) {
        const Vec3 c = sh_eval(coeffs, d, 0);
        CHECK(c[0] == doctest::Approx(0.28209479177387814 * 2.0).epsilon(1e-12));
        CHECK(c[1] == doctest::Approx(-0.28209479177387814).epsilon(1e-12));
        CHECK(c[2] == doctest::Approx(0.5 * 0.28209479177387814).epsilon(1e-12));
    }
}

TEST_CASE("sh_eval degree 1, (1,0) coefficient, +z direction") {
    Eigen::RowVectorXd coeffs = Eigen::RowVectorXd::Zero(12);
    coeffs[2 * 3 + 0] = 1.0; // (l,m) = (1,0), red channel
    const Vec3 c = sh_eval(coeffs, Vec3(0, 0, 1), 1);
    CHECK(c[0] == doctest::Approx(0.48860251).epsilon(1e-7));
    CHECK(c[1] == 0.0);
}

TEST_CASE("sh_eval of zero coefficients is black") {
    Eigen::RowVectorXd coeffs = Eigen::RowVectorXd::Zero(27);
    CHECK(sh_eval(coeffs, Vec3(0, 1, 0), 2).norm() == 0.0);
}

TEST_CASE("sh_eval is linear in coefficients") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::RowVectorXd a(27), b(27);
    for (int i = 0; i < 27; ++i) {
        a[i] = u(rng);
        b[i] = u(rng);
    }
    const Vec3 d = Vec3(0.3, -0.5, 0.8).normalized();
    const Vec3 lhs = sh_eval(a + b, d, 2);
    const Vec3 rhs = sh_eval(a, d, 2) + sh_eval(b, d, 2);
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sh_eval rejects a coefficient count mismatch") {
    Eigen::RowVectorXd coeffs = Eigen::RowVectorXd::Zero(12);
    CHECK_THROWS_AS(sh_eval(coeffs, Vec3(0, 0, 1), 2), ShapeError);
}

TEST_CASE("sh_eval_backward matches finite differences") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-0.5, 0.5);
    Eigen::RowVectorXd coeffs(27);
    for (int i = 0; i < 27; ++i) coeffs[i] = u(rng);
    Vec3 d = Vec3(0.2, -0.7, 0.6).normalized();
    const Vec3 weight(0.3, -1.1, 0.7);

    Eigen::RowVectorXd d_coeffs = Eigen::RowVectorXd::Zero(27);
    Vec3 d_dir = Vec3::Zero();
    sh_eval_backward(coeffs, d, 2, weight, d_coeffs, d_dir);

    const double h = 1e-6;
    for (int i = 0; i < 27; ++i) {
        const double saved = coeffs[i];
        coeffs[i] = saved + h;
        const double fp = weight.dot(sh_eval(coeffs, d, 2));
        coeffs[i] = saved - h;
        const double fm = weight.dot(sh_eval(coeffs, d, 2));
        coeffs[i] = saved;
        CHECK(d_coeffs[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
    }
    for (int i = 0; i < 3; ++i) {
        const double saved = d[i];
        d[i] = saved + h;
        const double fp = weight.dot(sh_eval(coeffs, d, 2));
        d[i] = saved - h;
        const double fm = weight.dot(sh_eval(coeffs, d, 2));
        d[i] = saved;
        CHECK(d_dir[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("project_gaussian puts an on-axis point at the principal point") {
    Camera cam = testutil::test_camera(640, 480, 500.0);
    cam.cx = 320.5;
    cam.cy = 240.25;
    const auto p = project_gaussian(Vec3(0, 0, 5), 0.01 * Mat3::Identity(), cam);
    REQUIRE(p.has_value());
    CHECK(p->mu2d.x() == doctest::Approx(320.5).epsilon(1e-12));
    CHECK(p->mu2d.y() == doctest::Approx(240.25).epsilon(1e-12));
    CHECK(p->depth == doctest::Approx(5.0));
}

TEST_CASE("project_gaussian isotropic covariance matches the analytic Jacobian") {
    Camera cam = testutil::test_camera(64, 64, 100.0);
    const double sigma = 0.3, z = 5.0;
    const auto p = project_gaussian(Vec3(0, 0, z), sigma * sigma * Mat3::Identity(), cam);
    REQUIRE(p.has_value());
    // J = diag(fx/z, fy/z) at the axis; cov2d = (f sigma / z)^2 I + pad
    const double expected = std::pow(100.0 * sigma / z, 2) + kLowPassPad;
    CHECK(p->cov2d(0, 0) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(p->cov2d(1, 1) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::abs(p->cov2d(0, 1)) < 1e-12);
}

TEST_CASE("project_gaussian culls points behind the camera") {
    const Camera cam = testutil::test_camera();
    CHECK(!project_gaussian(Vec3(0, 0, -1), Mat3::Identity(), cam).has_value());
    CHECK(!project_gaussian(Vec3(0, 0, 0.005), Mat3::Identity(), cam).has_value());
}

TEST_CASE("projected covariance eigenvalues are at least the low-pass pad") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Camera cam = testutil::test_camera(64, 48, 60.0);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec4 q = testutil::random_unit_quat(rng);
        const Vec3 s(0.05 + u(rng), 0.05 + u(rng), 0.05 + u(rng));
        const Vec3 mu(2.0 * u(rng) - 1.0, 2.0 * u(rng) - 1.0, 2.0 + 6.0 * u(rng));
        const auto p = project_gaussian(mu, covariance_from_rotation_scale(q, s), cam);
        REQUIRE(p.has_value());
        Eigen::SelfAdjointEigenSolver<Mat2> es(p->cov2d);
        CHECK(es.eigenvalues().minCoeff() >= kLowPassPad - 1e-9);
        CHECK(std::abs(p->cov2d(0, 1) - p->cov2d(1, 0)) < 1e-12);
    }
}

TEST_CASE("project_backward matches finite differences") {
    std::mt19937_64 rng(17);
    Camera cam = testutil::test_camera(32, 32, 40.0);
    cam.rotation = rotation_from_quat(testutil::random_unit_quat(rng));
    cam.translation = Vec3(0.1, -0.2, 0.3);

    Vec3 mu = cam.rotation.transpose() * (Vec3(0.2, -0.3, 5.0) - cam.translation);
    Vec4 q = testutil::random_unit_quat(rng);
    Vec3 s(0.4, 0.8, 0.3);

    Vec2 w_mu2d(0.7, -0.4);
    Mat2 w_cov;
    w_cov << 0.3, 0.1, 0.1, -0.2;

    const auto loss = [&]() {
        const Mat3 cov = covariance_from_rotation_scale(q / q.norm(), s);
        const auto p = project_gaussian(mu, cov, cam);
        REQUIRE(p.has_value());
        return w_mu2d.dot(p->mu2d) + (w_cov.cwiseProduct(p->cov2d)).sum();
    };

    const Mat3 cov = covariance_from_rotation_scale(q, s);
    Vec3 d_mu = Vec3::Zero();
    Mat3 d_cov = Mat3::Zero();
    project_backward(mu, cov, cam, w_mu2d, 0.5 * (w_cov + w_cov.transpose()), d_mu,
                     d_cov);
    Vec4 d_q = Vec4::Zero();
    Vec3 d_s = Vec3::Zero();
    covariance_backward(q, s, d_cov, d_q, d_s);

    const double h = 1e-6;
    for (int i = 0; i < 3; ++i) {
        const double saved = mu[i];
        mu[i] = saved + h;
        const double fp = loss();
        mu[i] = saved - h;
        const double fm = loss();
        mu[i] = saved;
        CHECK(d_mu[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
    }
    for (int i = 0; i < 3; ++i) {
        const double saved = s[i];
        s[i] = saved + h;
        const double fp = loss();
        s[i] = saved - h;
        const double fm = loss();
        s[i] = saved;
        CHECK(d_s[i] == doctest::Approx((fp - fm) / (2 * h)).epsilon(1e-5));
    }
}

TEST_CASE("GaussianSet::validate enforces the documented invariants") {
    GaussianSet g = GaussianSet::zeros(2, 0, 4);
    g.validate();
    GaussianSet bad = g;
    bad.quat[1] = Vec4(1.0, 1e-3, 0, 0);
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = g;
    bad.scale[0][1] = 0.0;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = g;
    bad.opacity[0] = 1.5;
    CHECK_THROWS_AS(bad.validate(), DomainError);
    bad = g;
    bad.embed = Eigen::MatrixXd::Zero(1, 4);
    CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("Camera::validate rejects improper rotations and empty images") {
    Camera cam = testutil::test_camera();
    cam.validate();
    Camera bad = cam;
    bad.width = 0;
    CHECK_THROWS_AS(bad.validate(), ShapeError);
    bad = cam;
    bad.rotation(0, 0) = -1.0; // det < 0
    CHECK_THROWS_AS(bad.validate(), DomainError);
}
