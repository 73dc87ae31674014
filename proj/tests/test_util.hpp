#pragma once

#include <random>

#include "splat4d/gradcheck.hpp"
#include "splat4d/scene.hpp"

namespace splat4d::testutil {

inline constexpr double kShDc = 1.0 / 0.28209479177387814;

inline Vec4 random_unit_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4 q(n(rng), n(rng), n(rng), n(rng));
    return q / q.norm();
}

/// K Gaussians in front of an identity-pose camera, colors strictly inside
/// (0,1) so the color clamp stays inactive (keeps gradients smooth).
inline GaussianSet random_scene(int k, int sh_degree, int embed_dim,
                                std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    GaussianSet g = GaussianSet::zeros(k, sh_degree, embed_dim);
    for (int i = 0; i < k; ++i) {
        g.mu[i] = Vec3(-1.0 + 2.0 * u(rng), -1.0 + 2.0 * u(rng), 4.0 + 4.0 * u(rng));
        g.scale[i] = Vec3(0.2 + 0.4 * u(rng), 0.2 + 0.4 * u(rng), 0.2 + 0.4 * u(rng));
        g.quat[i] = random_unit_quat(rng);
        g.opacity[i] = 0.3 + 0.5 * u(rng);
        g.sh(i, 0) = (0.3 + 0.4 * u(rng)) * kShDc;
        g.sh(i, 1) = (0.3 + 0.4 * u(rng)) * kShDc;
        g.sh(i, 2) = (0.3 + 0.4 * u(rng)) * kShDc;
        for (int c = 3; c < g.sh.cols(); ++c) g.sh(i, c) = 0.05 * (u(rng) - 0.5);
        for (int c = 0; c < embed_dim; ++c) g.embed(i, c) = 0.2 * (u(rng) - 0.5);
    }
    return g;
}

inline Camera test_camera(int w = 16, int h = 16, double f = 20.0) {
    Camera cam;
    cam.fx = cam.fy = f;
    cam.cx = w / 2.0;
    cam.cy = h / 2.0;
    cam.width = w;
    cam.height = h;
    return cam;
}

} // namespace splat4d::testutil
