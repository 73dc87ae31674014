#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "splat4d/gradcheck.hpp"
#include "splat4d/nn.hpp"

using namespace splat4d;

TEST_CASE("mlp with zero weights maps everything to zero") {
    Mlp net({3, 8, 2});
    const Eigen::MatrixXd y = net.forward(Eigen::MatrixXd::Random(3, 5));
    CHECK(y.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single linear layer computes Wx + b") {
    Mlp net({2, 3});
    auto& layers = net.mutable_layers();
    layers[0].w << 1, 2, 3, 4, 5, 6;
    layers[0].b << 0.5, -0.5, 0.25;
    Eigen::MatrixXd x(2, 1);
    x << 1.0, -1.0;
    const Eigen::MatrixXd y = net.forward(x);
    CHECK(y(0, 0) == doctest::Approx(1 - 2 + 0.5));
    CHECK(y(1, 0) == doctest::Approx(3 - 4 - 0.5));
    CHECK(y(2, 0) == doctest::Approx(5 - 6 + 0.25));
}

TEST_CASE("two-layer net matches a hand-rolled forward evaluation") {
    Mlp net({2, 2, 1});
    auto& layers = net.mutable_layers();
    layers[0].w << 0.3, -0.2, 0.1, 0.4;
    layers[0].b << 0.05, -0.1;
    layers[1].w << 0.7, -0.6;
    layers[1].b << 0.2;
    Eigen::MatrixXd x(2, 1);
    x << 0.5, -1.5;

    // independent scalar chain
    const double h0 = std::tanh(0.3 * 0.5 + (-0.2) * (-1.5) + 0.05);
    const double h1 = std::tanh(0.1 * 0.5 + 0.4 * (-1.5) - 0.1);
    const double expect = 0.7 * h0 - 0.6 * h1 + 0.2;

    CHECK(net.forward(x)(0, 0) == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("backward with zero output gradient yields zero everywhere") {
    std::mt19937_64 rng(1);
    Mlp net({4, 8, 3});
    net.init_random(rng, false);
    Mlp::Cache cache;
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 6);
    net.forward(x, &cache);
    auto grads = net.zero_grads();
    const Eigen::MatrixXd d_in =
        net.backward(cache, Eigen::MatrixXd::Zero(3, 6), grads);
    CHECK(d_in.cwiseAbs().maxCoeff() == 0.0);
    for (const auto& g : grads) {
        CHECK(g.w.cwiseAbs().maxCoeff() == 0.0);
        CHECK(g.b.cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("single linear layer has the closed-form adjoint") {
    Mlp net({3, 2});
    auto& layers = net.mutable_layers();
    layers[0].w << 1, -2, 3, 0.5, 0.25, -1;
    Mlp::Cache cache;
    Eigen::MatrixXd x(3, 1);
    x << 0.2, -0.4, 1.1;
    net.forward(x, &cache);
    Eigen::MatrixXd d_out(2, 1);
    d_out << 0.7, -0.3;
    auto grads = net.zero_grads();
    const Eigen::MatrixXd d_in = net.backward(cache, d_out, grads);
    CHECK((grads[0].w - d_out * x.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((grads[0].b - d_out).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((d_in - layers[0].w.transpose() * d_out).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("random 2-layer net gradients match central differences at 1e-6") {
    std::mt19937_64 rng(42);
    Mlp net({5, 16, 16, 4});
    net.init_random(rng, false);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(5, 7);
    const Eigen::MatrixXd weight = Eigen::MatrixXd::Random(4, 7);

    Mlp::Cache cache;
    net.forward(x, &cache);
    auto grads = net.zero_grads();
    net.backward(cache, weight, grads);

    std::vector<ParamBlock> blocks;
    std::vector<std::vector<double>> analytic;
    auto& layers = net.mutable_layers();
    for (size_t l = 0; l < layers.size(); ++l) {
        blocks.push_back({"w" + std::to_string(l), layers[l].w.data(),
                          layers[l].w.size()});
        analytic.emplace_back(grads[l].w.data(), grads[l].w.data() + grads[l].w.size());
        blocks.push_back({"b" + std::to_string(l), layers[l].b.data(),
                          layers[l].b.size()});
        analytic.emplace_back(grads[l].b.data(), grads[l].b.data() + grads[l].b.size());
    }
    const auto f = [&]() { return (net.forward(x).cwiseProduct(weight)).sum(); };
    const FdReport report = finite_diff_check(f, blocks, analytic, 1e-4);
    CHECK(report.max_rel_err <= 1e-6);
}

TEST_CASE("backward rejects a cache that predates a weight change") {
    std::mt19937_64 rng(2);
    Mlp net({2, 4, 1});
    net.init_random(rng, false);
    Mlp::Cache cache;
    net.forward(Eigen::MatrixXd::Random(2, 3), &cache);
    net.mutable_layers()[0].w(0, 0) += 0.1;
    auto grads = net.zero_grads();
    CHECK_THROWS_AS(net.backward(cache, Eigen::MatrixXd::Zero(1, 3), grads),
                    std::logic_error);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
    AdamState st;
    double p = 1.25;
    const double g = 0.0;
    adam_step(st, {.lr = 0.1}, &p, &g, 1, "p");
    CHECK(p == 1.25);
}

TEST_CASE("adam: first step matches the hand-evaluated update") {
    AdamState st;
    double p = 0.0;
    const double g = 1.0;
    adam_step(st, {.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8}, &p, &g, 1,
              "p");
    // mhat = 1, vhat = 1 -> delta = -0.1 / (1 + 1e-8)
    CHECK(p == doctest::Approx(-0.1 / (1.0 + 1e-8)).epsilon(1e-15));
    CHECK(p == doctest::Approx(-0.09999999).epsilon(1e-7));
}

TEST_CASE("adam is deterministic given identical state and inputs") {
    const auto run = [] {
        AdamState st;
        std::vector<double> p{0.5, -0.25, 1.0};
        const std::vector<double> g{0.3, -0.1, 0.9};
        for (int i = 0; i < 10; ++i)
            adam_step(st, {.lr = 0.01}, p.data(), g.data(), 3, "p");
        return p;
    };
    const auto a = run();
    const auto b = run();
    CHECK(a == b);
}

TEST_CASE("adam rejects non-finite gradients, naming the tensor") {
    AdamState st;
    double p = 0.0;
    const double g = std::numeric_limits<double>::quiet_NaN();
    try {
        adam_step(st, {}, &p, &g, 1, "scene.mu");
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("scene.mu") != std::string::npos);
    }
}

TEST_CASE("finite_diff_check is near-exact on a quadratic") {
    std::vector<double> p{0.3, -0.7, 1.1};
    const Eigen::Vector3d a(2.0, -1.0, 0.5);
    const auto f = [&]() {
        const Eigen::Map<const Eigen::Vector3d> x(p.data());
        return 0.5 * x.dot(x) + a.dot(x);
    };
    std::vector<ParamBlock> blocks{{"p", p.data(), 3}};
    std::vector<std::vector<double>> analytic{{p[0] + a[0], p[1] + a[1], p[2] + a[2]}};
    const FdReport r = finite_diff_check(f, blocks, analytic, 1e-4);
    CHECK(r.max_rel_err <= 1e-9);
}

TEST_CASE("finite_diff_check points at a corrupted gradient entry") {
    std::vector<double> p{0.4, -0.2, 0.9, 1.3};
    const auto f = [&]() {
        double s = 0;
        for (double v : p) s += v * v;
        return s;
    };
    std::vector<ParamBlock> blocks{{"p", p.data(), 4}};
    std::vector<std::vector<double>> analytic{{2 * p[0], 2 * p[1], 2 * 2 * p[2], 2 * p[3]}};
    const FdReport r = finite_diff_check(f, blocks, analytic, 1e-4);
    CHECK(r.worst.block == "p");
    CHECK(r.worst.index == 2);
    CHECK(r.max_rel_err > 0.1);
}
