#include "splat4d/rasterizer.hpp"

#include <algorithm>
#include <cmath>

#include "splat4d/parallel.hpp"
#include "splat4d/sh.hpp"

namespace splat4d {

namespace {

struct Splat {
    int index = 0;
    Vec2 mu2d = Vec2::Zero();
    Mat2 cov2d = Mat2::Zero();
    Mat2 conic = Mat2::Zero();
    Mat3 cov3d = Mat3::Zero();
    double depth = 0;
    double opacity = 0;
    Vec3 color = Vec3::Zero();     // clamped to [0,1]
    Vec3 color_raw = Vec3::Zero(); // SH evaluation before clamping
    Vec3 dir = Vec3::Zero();       // unit viewing direction
    double dir_norm = 0;
    double x0 = 0, x1 = 0, y0 = 0, y1 = 0; // footprint AABB, pixels
};

struct Prepared {
    std::vector<Splat> splats;
    std::vector<std::vector<int>> tiles; // indices into splats, depth-sorted
    int tiles_x = 0, tiles_y = 0;
};

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

Prepared prepare(const GaussianSet& scene, const Camera& cam,
                 const RenderOptions& opts) {
    scene.validate();
    cam.validate();
    const int k = scene.count();
    const Vec3 cam_pos = cam.position();
    const double fs = opts.footprint_sigma;

    Prepared prep;
    prep.tiles_x = (cam.width + opts.tile_size - 1) / opts.tile_size;
    prep.tiles_y = (cam.height + opts.tile_size - 1) / opts.tile_size;

    std::vector<Splat> slots(k);
    std::vector<char> keep(k, 0);
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int i = 0; i < k; ++i) {
        const Mat3 cov = covariance_from_rotation_scale(scene.quat[i], scene.scale[i]);
        auto proj = project_gaussian(scene.mu[i], cov, cam);
        if (!proj) continue;

        Splat s;
        s.index = i;
        s.mu2d = proj->mu2d;
        s.cov2d = proj->cov2d;
        s.cov3d = cov;
        s.depth = proj->depth;
        s.opacity = scene.opacity[i];
        const double det = s.cov2d(0, 0) * s.cov2d(1, 1) - s.cov2d(0, 1) * s.cov2d(1, 0);
        Mat2 adj;
        adj << s.cov2d(1, 1), -s.cov2d(0, 1), -s.cov2d(1, 0), s.cov2d(0, 0);
        s.conic = adj / det;

        const Vec3 v = scene.mu[i] - cam_pos;
        s.dir_norm = v.norm();
        s.dir = v / s.dir_norm;
        s.color_raw = sh_eval(scene.sh.row(i), s.dir, scene.sh_degree);
        s.color = s.color_raw.unaryExpr(&clamp01);

        s.x0 = s.mu2d.x() - fs * std::sqrt(s.cov2d(0, 0));
        s.x1 = s.mu2d.x() + fs * std::sqrt(s.cov2d(0, 0));
        s.y0 = s.mu2d.y() - fs * std::sqrt(s.cov2d(1, 1));
        s.y1 = s.mu2d.y() + fs * std::sqrt(s.cov2d(1, 1));
        if (s.x1 < 0 || s.x0 > cam.width || s.y1 < 0 || s.y0 > cam.height) continue;

        slots[i] = s;
        keep[i] = 1;
    }
    prep.splats.reserve(k);
    for (int i = 0; i < k; ++i)
        if (keep[i]) prep.splats.push_back(slots[i]);

    prep.tiles.assign(static_cast<size_t>(prep.tiles_x) * prep.tiles_y, {});
    for (int si = 0; si < static_cast<int>(prep.splats.size()); ++si) {
        const Splat& s = prep.splats[si];
        const int tx0 = std::clamp(static_cast<int>(std::floor(s.x0 / opts.tile_size)),
                                   0, prep.tiles_x - 1);
        const int tx1 = std::clamp(static_cast<int>(std::floor(s.x1 / opts.tile_size)),
                                   0, prep.tiles_x - 1);
        const int ty0 = std::clamp(static_cast<int>(std::floor(s.y0 / opts.tile_size)),
                                   0, prep.tiles_y - 1);
        const int ty1 = std::clamp(static_cast<int>(std::floor(s.y1 / opts.tile_size)),
                                   0, prep.tiles_y - 1);
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                prep.tiles[static_cast<size_t>(ty) * prep.tiles_x + tx].push_back(si);
    }
    const auto depth_then_index = [&](int a, int b) {
        const Splat& sa = prep.splats[a];
        const Splat& sb = prep.splats[b];
        if (sa.depth != sb.depth) return sa.depth < sb.depth;
        return sa.index < sb.index;
    };
    for (auto& list : prep.tiles) std::sort(list.begin(), list.end(), depth_then_index);
    return prep;
}

/// Visits the surviving contributions of one pixel in compositing order.
/// visit(pos_in_list, alpha, alpha_raw, q, dx, dy); skips footprint misses
/// (q beyond the sigma cutoff) and sub-threshold alphas, identically for
/// every tile partition.
template <class Visit>
void walk_pixel(const Prepared& prep, const std::vector<int>& list, double px,
                double py, const RenderOptions& opts, Visit&& visit) {
    const double q_cut = opts.footprint_sigma * opts.footprint_sigma;
    for (size_t pos = 0; pos < list.size(); ++pos) {
        const Splat& s = prep.splats[list[pos]];
        const double dx = px - s.mu2d.x();
        const double dy = py - s.mu2d.y();
        const double q = s.conic(0, 0) * dx * dx + 2.0 * s.conic(0, 1) * dx * dy +
                         s.conic(1, 1) * dy * dy;
        if (q > q_cut) continue;
        const double a_raw = s.opacity * std::exp(-0.5 * q);
        const double a = std::min(a_raw, opts.alpha_clamp);
        if (a < opts.alpha_skip) continue;
        visit(pos, a, a_raw, q, dx, dy);
    }
}

void validate_background(const Vec3& bg) {
    if (!(bg.array() >= 0.0).all() || !(bg.array() <= 1.0).all())
        throw DomainError("render: background must lie in [0,1]^3");
}

} // namespace

RenderGrads RenderGrads::zeros(const GaussianSet& g) {
    RenderGrads r;
    r.d_mu.assign(g.count(), Vec3::Zero());
    r.d_scale.assign(g.count(), Vec3::Zero());
    r.d_quat.assign(g.count(), Vec4::Zero());
    r.d_opacity.assign(g.count(), 0.0);
    r.d_sh = Eigen::MatrixXd::Zero(g.sh.rows(), g.sh.cols());
    r.d_background = Vec3::Zero();
    return r;
}

RenderOutput render(const GaussianSet& scene, const Camera& cam,
                    const Vec3& background, const RenderOptions& opts) {
    validate_background(background);
    const Prepared prep = prepare(scene, cam, opts);

    RenderOutput out;
    out.image = Image(cam.height, cam.width);
    out.final_transmittance = Eigen::MatrixXd::Ones(cam.height, cam.width);
    out.tiles_x = prep.tiles_x;
    out.tiles_y = prep.tiles_y;

    const int n_tiles = prep.tiles_x * prep.tiles_y;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& list = prep.tiles[tile];
        const int tx = tile % prep.tiles_x;
        const int ty = tile / prep.tiles_x;
        const int x_end = std::min((tx + 1) * opts.tile_size, cam.width);
        const int y_end = std::min((ty + 1) * opts.tile_size, cam.height);
        for (int y = ty * opts.tile_size; y < y_end; ++y) {
            for (int x = tx * opts.tile_size; x < x_end; ++x) {
                Vec3 c = Vec3::Zero();
                double t = 1.0;
                walk_pixel(prep, list, x + 0.5, y + 0.5, opts,
                           [&](size_t pos, double a, double, double, double, double) {
                               c += prep.splats[list[pos]].color * (a * t);
                               t *= 1.0 - a;
                           });
                c += t * background;
                for (int ch = 0; ch < 3; ++ch) out.image.at(y, x, ch) = c[ch];
                out.final_transmittance(y, x) = t;
            }
        }
    }

    out.per_tile_lists.resize(prep.tiles.size());
    for (size_t tile = 0; tile < prep.tiles.size(); ++tile) {
        out.per_tile_lists[tile].reserve(prep.tiles[tile].size());
        for (int si : prep.tiles[tile])
            out.per_tile_lists[tile].push_back(prep.splats[si].index);
    }
    return out;
}

RenderGrads render_backward(const GaussianSet& scene, const Camera& cam,
                            const Vec3& background, const Image& d_image,
                            const RenderOptions& opts) {
    validate_background(background);
    if (d_image.height() != cam.height || d_image.width() != cam.width)
        throw ShapeError("render_backward: d_image shape does not match camera");
    const Prepared prep = prepare(scene, cam, opts);
    const int n_tiles = prep.tiles_x * prep.tiles_y;

    // Per-tile partial gradients in screen space, merged in tile order below
    // so the result does not depend on the parallel schedule.
    struct TileGrad {
        std::vector<Vec2> d_mu2d;
        std::vector<Mat2> d_conic;
        std::vector<Vec3> d_color;
        std::vector<double> d_opacity;
        Vec3 d_bg = Vec3::Zero();
    };
    std::vector<TileGrad> tile_grads(n_tiles);

    struct Step {
        size_t pos;
        double alpha, a_raw, q, dx, dy, t_before;
    };

#pragma omp parallel num_threads(worker_threads())
    {
        std::vector<Step> steps;
#pragma omp for schedule(static)
        for (int tile = 0; tile < n_tiles; ++tile) {
            const auto& list = prep.tiles[tile];
            TileGrad& tg = tile_grads[tile];
            tg.d_mu2d.assign(list.size(), Vec2::Zero());
            tg.d_conic.assign(list.size(), Mat2::Zero());
            tg.d_color.assign(list.size(), Vec3::Zero());
            tg.d_opacity.assign(list.size(), 0.0);

            const int tx = tile % prep.tiles_x;
            const int ty = tile / prep.tiles_x;
            const int x_end = std::min((tx + 1) * opts.tile_size, cam.width);
            const int y_end = std::min((ty + 1) * opts.tile_size, cam.height);
            for (int y = ty * opts.tile_size; y < y_end; ++y) {
                for (int x = tx * opts.tile_size; x < x_end; ++x) {
                    const Vec3 d_pix(d_image.at(y, x, 0), d_image.at(y, x, 1),
                                     d_image.at(y, x, 2));
                    steps.clear();
                    double t = 1.0;
                    walk_pixel(prep, list, x + 0.5, y + 0.5, opts,
                               [&](size_t pos, double a, double a_raw, double q,
                                   double dx, double dy) {
                                   steps.push_back({pos, a, a_raw, q, dx, dy, t});
                                   t *= 1.0 - a;
                               });
                    const double t_final = t;
                    tg.d_bg += t_final * d_pix;

                    // Suffix color including the background term:
                    // A_i = sum_{j>i} c_j a_j T_j + T_final * bg
                    Vec3 after = t_final * background;
                    for (int i = static_cast<int>(steps.size()) - 1; i >= 0; --i) {
                        const Step& st = steps[i];
                        const Splat& s = prep.splats[list[st.pos]];
                        tg.d_color[st.pos] += d_pix * (st.alpha * st.t_before);
                        if (st.a_raw < opts.alpha_clamp) {
                            const double d_a = d_pix.dot(s.color * st.t_before -
                                                         after / (1.0 - st.alpha));
                            const double g = std::exp(-0.5 * st.q);
                            tg.d_opacity[st.pos] += g * d_a;
                            const double d_q = -0.5 * st.a_raw * d_a;
                            const Vec2 dxv(st.dx, st.dy);
                            tg.d_mu2d[st.pos] -= d_q * 2.0 * (s.conic * dxv);
                            tg.d_conic[st.pos] += d_q * dxv * dxv.transpose();
                        }
                        after += s.color * (st.alpha * st.t_before);
                    }
                }
            }
        }
    }

    // Merge tile partials in tile-index order, then run the per-splat
    // geometry chain in parallel (writes are disjoint per Gaussian).
    const int n_splats = static_cast<int>(prep.splats.size());
    std::vector<Vec2> d_mu2d(n_splats, Vec2::Zero());
    std::vector<Mat2> d_conic(n_splats, Mat2::Zero());
    std::vector<Vec3> d_color(n_splats, Vec3::Zero());
    std::vector<double> d_opacity(n_splats, 0.0);
    RenderGrads grads = RenderGrads::zeros(scene);
    for (int tile = 0; tile < n_tiles; ++tile) {
        const auto& list = prep.tiles[tile];
        const TileGrad& tg = tile_grads[tile];
        for (size_t j = 0; j < list.size(); ++j) {
            d_mu2d[list[j]] += tg.d_mu2d[j];
            d_conic[list[j]] += tg.d_conic[j];
            d_color[list[j]] += tg.d_color[j];
            d_opacity[list[j]] += tg.d_opacity[j];
        }
        grads.d_background += tg.d_bg;
    }

#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int si = 0; si < n_splats; ++si) {
        const Splat& s = prep.splats[si];
        const int i = s.index;
        grads.d_opacity[i] += d_opacity[si];

        // conic = inv(cov2d):  d_cov2d = -conic * d_conic * conic
        const Mat2 d_cov2d = -s.conic * d_conic[si] * s.conic;

        // color clamp: pass-through on (0,1), zero outside
        Vec3 d_color_raw = Vec3::Zero();
        for (int ch = 0; ch < 3; ++ch)
            if (s.color_raw[ch] > 0.0 && s.color_raw[ch] < 1.0)
                d_color_raw[ch] = d_color[si][ch];

        Vec3 d_dir = Vec3::Zero();
        Eigen::RowVectorXd d_sh_row = Eigen::RowVectorXd::Zero(scene.sh.cols());
        sh_eval_backward(scene.sh.row(i), s.dir, scene.sh_degree, d_color_raw,
                         d_sh_row, d_dir);
        grads.d_sh.row(i) += d_sh_row;

        // dir = v / |v|, v = mu - cam_pos
        Vec3 d_mu_i = (Mat3::Identity() - s.dir * s.dir.transpose()) / s.dir_norm * d_dir;

        Mat3 d_cov3d = Mat3::Zero();
        project_backward(scene.mu[i], s.cov3d, cam, d_mu2d[si], d_cov2d, d_mu_i,
                         d_cov3d);
        grads.d_mu[i] += d_mu_i;
        covariance_backward(scene.quat[i], scene.scale[i], d_cov3d, grads.d_quat[i],
                            grads.d_scale[i]);
    }
    return grads;
}

PixelTrace trace_pixel(const GaussianSet& scene, const Camera& cam,
                       const Vec3& background, int px, int py,
                       const RenderOptions& opts) {
    validate_background(background);
    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
        throw ShapeError("trace_pixel: pixel out of bounds");
    const Prepared prep = prepare(scene, cam, opts);
    const int tx = px / opts.tile_size;
    const int ty = py / opts.tile_size;
    const auto& list = prep.tiles[static_cast<size_t>(ty) * prep.tiles_x + tx];

    PixelTrace trace;
    double t = 1.0;
    Vec3 c = Vec3::Zero();
    walk_pixel(prep, list, px + 0.5, py + 0.5, opts,
               [&](size_t pos, double a, double, double, double, double) {
                   const Splat& s = prep.splats[list[pos]];
                   trace.contributions.push_back({s.index, a, t, s.color});
                   c += s.color * (a * t);
                   t *= 1.0 - a;
               });
    trace.t_final = t;
    trace.color = c + t * background;
    return trace;
}

} // namespace splat4d
