#pragma once

#include <Eigen/Dense>
#include <vector>

#include "splat4d/image.hpp"
#include "splat4d/scene.hpp"

namespace splat4d {

struct RenderOptions {
    int tile_size = 16;
    double alpha_clamp = 0.99;      // keeps the transmittance adjoint finite
    double alpha_skip = 1.0 / 255.0;
    double footprint_sigma = 3.0;   // contributions beyond this Mahalanobis radius are dropped
};

struct RenderOutput {
    Image image;
    Eigen::MatrixXd final_transmittance; // H x W
    int tiles_x = 0, tiles_y = 0;
    std::vector<std::vector<int>> per_tile_lists; // Gaussian indices, depth-sorted
};

/// Gradients of a scalar loss w.r.t. every Gaussian parameter and the
/// background color. Shapes mirror the GaussianSet.
struct RenderGrads {
    std::vector<Vec3> d_mu;
    std::vector<Vec3> d_scale;
    std::vector<Vec4> d_quat;
    std::vector<double> d_opacity;
    Eigen::MatrixXd d_sh;
    Vec3 d_background = Vec3::Zero();

    static RenderGrads zeros(const GaussianSet& g);
};

/// Front-to-back alpha compositing of the projected Gaussians, in ascending
/// camera-space depth (ties broken by index). Per-Gaussian colors are
/// SH-evaluated along the camera ray and clamped to [0,1].
RenderOutput render(const GaussianSet& scene, const Camera& cam,
                    const Vec3& background, const RenderOptions& opts = {});

/// Exact adjoint of render for the loss sum_pixels <d_image, image>.
RenderGrads render_backward(const GaussianSet& scene, const Camera& cam,
                            const Vec3& background, const Image& d_image,
                            const RenderOptions& opts = {});

/// One compositing step as seen by a single pixel (test instrumentation).
struct PixelContribution {
    int index;            // Gaussian index
    double alpha;         // clamped opacity contribution at this pixel
    double t_before;      // transmittance before this Gaussian
    Vec3 color;           // clamped Gaussian color
};

struct PixelTrace {
    std::vector<PixelContribution> contributions;
    double t_final = 1.0;
    Vec3 color = Vec3::Zero();
};

/// Walks one pixel through the identical compositing path used by render.
PixelTrace trace_pixel(const GaussianSet& scene, const Camera& cam,
                       const Vec3& background, int px, int py,
                       const RenderOptions& opts = {});

} // namespace splat4d
