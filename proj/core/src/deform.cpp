#include "splat4d/deform.hpp"

#include <cmath>
#include <exception>

#include "splat4d/parallel.hpp"
#include "splat4d/quat.hpp"

namespace splat4d {

namespace {

constexpr int kBlock = 512; // samples per work block; fixed so results are
                            // bit-identical for any thread count

// Snap interpolation weights within this distance of a knot onto it, so
// knot positions reproduce rows exactly despite t = k/(N-1) rounding.
constexpr double kKnotSnap = 1e-12;

void check_t(double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw DomainError("time must lie in [0,1], got " + std::to_string(t));
}

} // namespace

Eigen::VectorXd positional_encode(const Vec3& mu, int bands) {
    if (bands < 0) throw ShapeError("positional_encode: bands must be >= 0");
    Eigen::VectorXd f(3 + 6 * bands);
    f.head<3>() = mu;
    for (int i = 0; i < bands; ++i) {
        const double w = std::pow(2.0, i) * M_PI;
        for (int c = 0; c < 3; ++c) {
            f[3 + 6 * i + c] = std::sin(w * mu[c]);
            f[3 + 6 * i + 3 + c] = std::cos(w * mu[c]);
        }
    }
    return f;
}

Vec3 positional_encode_backward(const Vec3& mu, int bands,
                                const Eigen::Ref<const Eigen::VectorXd>& d_feat) {
    if (d_feat.size() != 3 + 6 * bands)
        throw ShapeError("positional_encode_backward: feature length mismatch");
    Vec3 d_mu = d_feat.head<3>();
    for (int i = 0; i < bands; ++i) {
        const double w = std::pow(2.0, i) * M_PI;
        for (int c = 0; c < 3; ++c) {
            const double s = std::sin(w * mu[c]);
            const double cs = std::cos(w * mu[c]);
            d_mu[c] += w * (cs * d_feat[3 + 6 * i + c] - s * d_feat[3 + 6 * i + 3 + c]);
        }
    }
    return d_mu;
}

int schedule_samples(long iter, const TemporalEmbedding& emb) {
    if (emb.n_min < 1 || emb.n_min > emb.n_max || emb.total_iters < 1)
        throw ConfigError("TemporalEmbedding: need 1 <= n_min <= n_max, total_iters >= 1");
    if (iter < 0 || iter > emb.total_iters)
        throw DomainError("schedule_samples: iteration outside [0, total_iters]");
    const long span = emb.n_max - emb.n_min;
    return emb.n_min + static_cast<int>((span * iter) / emb.total_iters);
}

TemporalInterp temporal_interp(double t, long iter, const TemporalEmbedding& emb) {
    check_t(t);
    const int n = schedule_samples(iter, emb);
    TemporalInterp out;
    if (n == 1) return out; // single active knot: row 0, weight 0
    const double u = t * (n - 1);
    int j = std::min(static_cast<int>(std::floor(u)), n - 2);
    double w = u - j;
    if (w < kKnotSnap) w = 0.0;
    if (w > 1.0 - kKnotSnap) {
        ++j;
        w = 0.0;
        if (j == n - 1) --j, w = 1.0; // right endpoint stays in the last interval
    }
    // Active knots are rows of W at evenly spaced indices.
    const auto row_of = [&](int k) {
        return static_cast<int>(
            std::llround(static_cast<double>(k) * (emb.n_max - 1) / (n - 1)));
    };
    out.row0 = row_of(j);
    out.row1 = row_of(j + 1);
    out.weight = w;
    return out;
}

Eigen::VectorXd temporal_embed(double t, long iter, const TemporalEmbedding& emb) {
    if (!emb.w.allFinite()) throw NumericError("temporal_embed: non-finite rows in W");
    const TemporalInterp in = temporal_interp(t, iter, emb);
    return (1.0 - in.weight) * emb.w.row(in.row0).transpose() +
           in.weight * emb.w.row(in.row1).transpose();
}

Eigen::VectorXd aggregate_features(const Vec3& mu, double t,
                                   const Eigen::Ref<const Eigen::VectorXd>& z,
                                   long iter, const TemporalEmbedding& temporal,
                                   const EncodingConfig& enc) {
    if (z.size() != enc.gauss_dim)
        throw ShapeError("aggregate_features: embedding width mismatch");
    if (temporal.w.cols() != enc.temporal_dim)
        throw ShapeError("aggregate_features: temporal width mismatch");
    Eigen::VectorXd f(enc.feature_length());
    f.head(3 + 6 * enc.pos_bands) = positional_encode(mu, enc.pos_bands);
    f.segment(3 + 6 * enc.pos_bands, enc.temporal_dim) = temporal_embed(t, iter, temporal);
    f.tail(enc.gauss_dim) = z;
    return f;
}

Vec4 quaternion_delta(const Vec4& raw) {
    const Vec4 v(1.0 + raw[0], raw[1], raw[2], raw[3]);
    const double n = v.norm();
    if (n < 1e-8)
        throw NumericError("quaternion_delta: degenerate rotation (|identity + raw| ~ 0)");
    return v / n;
}

DualScaleDeformer DualScaleDeformer::create(const EncodingConfig& enc, int n_min,
                                            int n_max, long total_iters, int sh_coeffs,
                                            int hidden_width, int hidden_depth,
                                            double fine_gain, std::mt19937_64& rng) {
    if (n_min < 1 || n_min > n_max || total_iters < 1)
        throw ConfigError("DualScaleDeformer: bad temporal schedule");
    if (hidden_width < 1 || hidden_depth < 1 || sh_coeffs < 1)
        throw ConfigError("DualScaleDeformer: bad head architecture");
    DualScaleDeformer d;
    d.enc = enc;
    d.sh_coeffs = sh_coeffs;
    std::vector<int> sizes;
    sizes.push_back(enc.feature_length());
    for (int i = 0; i < hidden_depth; ++i) sizes.push_back(hidden_width);
    sizes.push_back(d.head_output_size());
    d.coarse.mlp = Mlp(sizes);
    d.coarse.mlp.init_random(rng, /*zero_init_last=*/true);
    d.coarse.output_gain = 1.0;
    d.fine.mlp = Mlp(sizes);
    d.fine.mlp.init_random(rng, /*zero_init_last=*/true);
    d.fine.output_gain = fine_gain;
    d.temporal.n_min = n_min;
    d.temporal.n_max = n_max;
    d.temporal.total_iters = total_iters;
    d.temporal.w = Eigen::MatrixXd::Zero(n_max, enc.temporal_dim);
    std::normal_distribution<double> dist(0.0, 0.1);
    for (Eigen::Index r = 0; r < d.temporal.w.rows(); ++r)
        for (Eigen::Index c = 0; c < d.temporal.w.cols(); ++c)
            d.temporal.w(r, c) = dist(rng);
    return d;
}

namespace {

struct Slices {
    // row offsets into the head output
    static constexpr int mu = 0;
    static constexpr int scale = 3;
    static constexpr int quat = 6;
    static constexpr int opacity = 10;
    static constexpr int sh = 11;
};

} // namespace

GaussianSet deform(const GaussianSet& scene, double t, long iter,
                   const DualScaleDeformer& d, const DeformSwitches& sw,
                   DeformCache* cache) {
    scene.validate();
    check_t(t);
    if (scene.sh_coeff_count() != d.sh_coeffs)
        throw ShapeError("deform: deformer built for a different SH degree");
    if (scene.embed.cols() != d.enc.gauss_dim)
        throw ShapeError("deform: embedding width mismatch");

    const int k = scene.count();
    const int feat_len = d.enc.feature_length();
    const int out_len = d.head_output_size();
    const int pos_len = 3 + 6 * d.enc.pos_bands;
    const int n_blocks = (k + kBlock - 1) / kBlock;

    const Eigen::VectorXd f_temp =
        sw.use_temporal ? temporal_embed(t, iter, d.temporal)
                        : Eigen::VectorXd::Zero(d.enc.temporal_dim);

    DeformCache local_cache;
    DeformCache& c = cache ? *cache : local_cache;
    c.t = t;
    c.iter = iter;
    c.switches = sw;
    c.interp = temporal_interp(t, iter, d.temporal);
    c.temporal_feature = f_temp;
    c.block_size = kBlock;
    c.coarse_caches.assign(n_blocks, {});
    c.fine_caches.assign(n_blocks, {});
    c.out_c = Eigen::MatrixXd::Zero(out_len, k);
    c.out_f = Eigen::MatrixXd::Zero(out_len, k);
    c.delta_c.assign(k, kIdentityQuat);
    c.delta_f.assign(k, kIdentityQuat);
    c.q_unnormalized.assign(k, kIdentityQuat);
    c.scale_preclamp.assign(k, Vec3::Zero());
    c.opacity_preclamp.assign(k, 0.0);

    GaussianSet out = scene; // embeddings and sh_degree ride along

    // Exceptions may not unwind out of an OpenMP region; capture and rethrow.
    std::exception_ptr eptr = nullptr;
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int b = 0; b < n_blocks; ++b) {
        try {
            const int col0 = b * kBlock;
            const int n = std::min(kBlock, k - col0);

            Eigen::MatrixXd feat(feat_len, n);
            for (int j = 0; j < n; ++j) {
                const int gi = col0 + j;
                feat.col(j).head(pos_len) =
                    positional_encode(scene.mu[gi] * d.position_scale, d.enc.pos_bands);
                feat.col(j).segment(pos_len, d.enc.temporal_dim) = f_temp;
                if (sw.use_gauss_embed)
                    feat.col(j).tail(d.enc.gauss_dim) = scene.embed.row(gi).transpose();
                else
                    feat.col(j).tail(d.enc.gauss_dim).setZero();
            }
            if (sw.use_coarse)
                c.out_c.middleCols(col0, n) =
                    d.coarse.output_gain *
                    d.coarse.mlp.forward(feat, cache ? &c.coarse_caches[b] : nullptr);

            if (sw.use_fine) {
                // Re-encode only the positional component at mu + d_mu_coarse.
                for (int j = 0; j < n; ++j) {
                    const int gi = col0 + j;
                    const Vec3 shifted =
                        scene.mu[gi] + c.out_c.col(gi).segment<3>(Slices::mu);
                    feat.col(j).head(pos_len) =
                        positional_encode(shifted * d.position_scale, d.enc.pos_bands);
                }
                c.out_f.middleCols(col0, n) =
                    d.fine.output_gain *
                    d.fine.mlp.forward(feat, cache ? &c.fine_caches[b] : nullptr);
            }

            for (int j = 0; j < n; ++j) {
                const int gi = col0 + j;
                const auto oc = c.out_c.col(gi);
                const auto of = c.out_f.col(gi);
                if (!oc.allFinite() || !of.allFinite())
                    throw NumericError("deform: non-finite head output for Gaussian " +
                                       std::to_string(gi));

                out.mu[gi] = scene.mu[gi] + oc.segment<3>(Slices::mu) +
                             of.segment<3>(Slices::mu);

                const Vec3 s_pre = scene.scale[gi] + oc.segment<3>(Slices::scale) +
                                   of.segment<3>(Slices::scale);
                c.scale_preclamp[gi] = s_pre;
                out.scale[gi] = s_pre.cwiseMax(kMinScale);

                c.delta_c[gi] = quaternion_delta(oc.segment<4>(Slices::quat));
                c.delta_f[gi] = quaternion_delta(of.segment<4>(Slices::quat));
                const Vec4 u =
                    hamilton(hamilton(scene.quat[gi], c.delta_c[gi]), c.delta_f[gi]);
                c.q_unnormalized[gi] = u;
                out.quat[gi] = u / u.norm();

                const double a_pre =
                    scene.opacity[gi] + oc(Slices::opacity) + of(Slices::opacity);
                c.opacity_preclamp[gi] = a_pre;
                out.opacity[gi] = std::clamp(a_pre, 0.0, 1.0);

                out.sh.row(gi) = scene.sh.row(gi) +
                                 oc.tail(3 * d.sh_coeffs).transpose() +
                                 of.tail(3 * d.sh_coeffs).transpose();
            }
        } catch (...) {
#pragma omp critical
            if (!eptr) eptr = std::current_exception();
        }
    }
    if (eptr) std::rethrow_exception(eptr);
    return out;
}

DeformGrads DeformGrads::zeros(const GaussianSet& scene, const DualScaleDeformer& d) {
    DeformGrads g;
    const int k = scene.count();
    g.d_mu.assign(k, Vec3::Zero());
    g.d_scale.assign(k, Vec3::Zero());
    g.d_quat.assign(k, Vec4::Zero());
    g.d_opacity.assign(k, 0.0);
    g.d_sh = Eigen::MatrixXd::Zero(scene.sh.rows(), scene.sh.cols());
    g.d_embed = Eigen::MatrixXd::Zero(scene.embed.rows(), scene.embed.cols());
    g.d_temporal_w = Eigen::MatrixXd::Zero(d.temporal.w.rows(), d.temporal.w.cols());
    g.d_coarse = d.coarse.mlp.zero_grads();
    g.d_fine = d.fine.mlp.zero_grads();
    return g;
}

DeformGrads deform_backward(const GaussianSet& scene, const DualScaleDeformer& d,
                            const DeformCache& cache, const RenderGrads& upstream) {
    const int k = scene.count();
    if (static_cast<int>(upstream.d_mu.size()) != k ||
        upstream.d_sh.rows() != scene.sh.rows())
        throw ShapeError("deform_backward: upstream gradient shape mismatch");

    const DeformSwitches& sw = cache.switches;
    const int out_len = d.head_output_size();
    const int pos_len = 3 + 6 * d.enc.pos_bands;
    const int n_blocks = (k + kBlock - 1) / kBlock;
    DeformGrads g = DeformGrads::zeros(scene, d);

    Eigen::MatrixXd d_out_c = Eigen::MatrixXd::Zero(out_len, k);
    Eigen::MatrixXd d_out_f = Eigen::MatrixXd::Zero(out_len, k);

    // Combination-stage adjoint: distribute upstream gradients onto the
    // canonical parameters and both head outputs (writes are per-Gaussian).
#pragma omp parallel for schedule(static) num_threads(worker_threads())
    for (int gi = 0; gi < k; ++gi) {
        auto doc = d_out_c.col(gi);
        auto dof = d_out_f.col(gi);

        // sh: plain sums
        g.d_sh.row(gi) += upstream.d_sh.row(gi);
        doc.tail(3 * d.sh_coeffs) += upstream.d_sh.row(gi).transpose();
        dof.tail(3 * d.sh_coeffs) += upstream.d_sh.row(gi).transpose();

        // opacity: clamp to [0,1]
        const double a_pre = cache.opacity_preclamp[gi];
        if (a_pre > 0.0 && a_pre < 1.0) {
            g.d_opacity[gi] += upstream.d_opacity[gi];
            doc(Slices::opacity) += upstream.d_opacity[gi];
            dof(Slices::opacity) += upstream.d_opacity[gi];
        }

        // scale: floor clamp per component
        for (int cix = 0; cix < 3; ++cix) {
            if (cache.scale_preclamp[gi][cix] > kMinScale) {
                g.d_scale[gi][cix] += upstream.d_scale[gi][cix];
                doc(Slices::scale + cix) += upstream.d_scale[gi][cix];
                dof(Slices::scale + cix) += upstream.d_scale[gi][cix];
            }
        }

        // quaternion chain: q_t = normalize(q (x) delta_c (x) delta_f)
        const Vec4 d_u =
            normalize_quat_backward(cache.q_unnormalized[gi], upstream.d_quat[gi]);
        const Vec4 pa = hamilton(scene.quat[gi], cache.delta_c[gi]);
        const Vec4 d_pa = hamilton_right_matrix(cache.delta_f[gi]).transpose() * d_u;
        const Vec4 d_df = hamilton_left_matrix(pa).transpose() * d_u;
        g.d_quat[gi] += hamilton_right_matrix(cache.delta_c[gi]).transpose() * d_pa;
        const Vec4 d_dc = hamilton_left_matrix(scene.quat[gi]).transpose() * d_pa;
        // delta = normalize(identity + raw)
        const Vec4 raw_c = cache.out_c.col(gi).segment<4>(Slices::quat);
        const Vec4 raw_f = cache.out_f.col(gi).segment<4>(Slices::quat);
        const Vec4 v_c(1.0 + raw_c[0], raw_c[1], raw_c[2], raw_c[3]);
        const Vec4 v_f(1.0 + raw_f[0], raw_f[1], raw_f[2], raw_f[3]);
        doc.segment<4>(Slices::quat) += normalize_quat_backward(v_c, d_dc);
        dof.segment<4>(Slices::quat) += normalize_quat_backward(v_f, d_df);

        // position: mu_t = mu + d_mu_c + d_mu_f
        g.d_mu[gi] += upstream.d_mu[gi];
        doc.segment<3>(Slices::mu) += upstream.d_mu[gi];
        dof.segment<3>(Slices::mu) += upstream.d_mu[gi];
    }

    // Gradient of the positional block of a cached feature matrix, read off
    // the stored sin/cos values instead of re-evaluating them.
    const auto posenc_block_backward = [&](const Eigen::MatrixXd& feat, int col,
                                           const Eigen::VectorXd& d_feat) -> Vec3 {
        Vec3 d_x = d_feat.head<3>();
        for (int i = 0; i < d.enc.pos_bands; ++i) {
            const double w = std::pow(2.0, i) * M_PI;
            for (int cix = 0; cix < 3; ++cix) {
                const double s = feat(3 + 6 * i + cix, col);
                const double cs = feat(3 + 6 * i + 3 + cix, col);
                d_x[cix] += w * (cs * d_feat[3 + 6 * i + cix] -
                                 s * d_feat[3 + 6 * i + 3 + cix]);
            }
        }
        return d_x * d.position_scale; // encoded input was x * position_scale
    };

    std::vector<Eigen::VectorXd> d_temp_partial(
        n_blocks, Eigen::VectorXd::Zero(d.enc.temporal_dim));
    std::vector<std::vector<MlpLayer>> fine_partial(n_blocks);
    std::vector<std::vector<MlpLayer>> coarse_partial(n_blocks);

    // Fine head first: its positional input depends on the coarse output, so
    // it adds to d_out_c before the coarse pass consumes it.
    std::exception_ptr eptr = nullptr;
    if (sw.use_fine) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (int b = 0; b < n_blocks; ++b) {
            try {
                const int col0 = b * kBlock;
                const int n = std::min(kBlock, k - col0);
                fine_partial[b] = d.fine.mlp.zero_grads();
                const Eigen::MatrixXd d_mlp_out =
                    d.fine.output_gain * d_out_f.middleCols(col0, n);
                const Eigen::MatrixXd d_feat = d.fine.mlp.backward(
                    cache.fine_caches[b], d_mlp_out, fine_partial[b]);
                for (int j = 0; j < n; ++j) {
                    const int gi = col0 + j;
                    const Vec3 d_shift = posenc_block_backward(
                        cache.fine_caches[b].input, j, d_feat.col(j).head(pos_len));
                    g.d_mu[gi] += d_shift;
                    if (sw.use_coarse) d_out_c.col(gi).segment<3>(Slices::mu) += d_shift;
                    if (sw.use_temporal)
                        d_temp_partial[b] +=
                            d_feat.col(j).segment(pos_len, d.enc.temporal_dim);
                    if (sw.use_gauss_embed)
                        g.d_embed.row(gi) +=
                            d_feat.col(j).tail(d.enc.gauss_dim).transpose();
                }
            } catch (...) {
#pragma omp critical
                if (!eptr) eptr = std::current_exception();
            }
        }
        if (eptr) std::rethrow_exception(eptr);
    }

    if (sw.use_coarse) {
#pragma omp parallel for schedule(static) num_threads(worker_threads())
        for (int b = 0; b < n_blocks; ++b) {
            try {
                const int col0 = b * kBlock;
                const int n = std::min(kBlock, k - col0);
                coarse_partial[b] = d.coarse.mlp.zero_grads();
                const Eigen::MatrixXd d_mlp_out =
                    d.coarse.output_gain * d_out_c.middleCols(col0, n);
                const Eigen::MatrixXd d_feat = d.coarse.mlp.backward(
                    cache.coarse_caches[b], d_mlp_out, coarse_partial[b]);
                for (int j = 0; j < n; ++j) {
                    const int gi = col0 + j;
                    g.d_mu[gi] += posenc_block_backward(cache.coarse_caches[b].input, j,
                                                        d_feat.col(j).head(pos_len));
                    if (sw.use_temporal)
                        d_temp_partial[b] +=
                            d_feat.col(j).segment(pos_len, d.enc.temporal_dim);
                    if (sw.use_gauss_embed)
                        g.d_embed.row(gi) +=
                            d_feat.col(j).tail(d.enc.gauss_dim).transpose();
                }
            } catch (...) {
#pragma omp critical
                if (!eptr) eptr = std::current_exception();
            }
        }
        if (eptr) std::rethrow_exception(eptr);
    }

    // Ordered reductions.
    for (int b = 0; b < n_blocks; ++b) {
        if (sw.use_fine)
            for (size_t l = 0; l < g.d_fine.size(); ++l) {
                g.d_fine[l].w += fine_partial[b][l].w;
                g.d_fine[l].b += fine_partial[b][l].b;
            }
        if (sw.use_coarse)
            for (size_t l = 0; l < g.d_coarse.size(); ++l) {
                g.d_coarse[l].w += coarse_partial[b][l].w;
                g.d_coarse[l].b += coarse_partial[b][l].b;
            }
    }
    if (sw.use_temporal) {
        Eigen::VectorXd d_temp = Eigen::VectorXd::Zero(d.enc.temporal_dim);
        for (int b = 0; b < n_blocks; ++b) d_temp += d_temp_partial[b];
        g.d_temporal_w.row(cache.interp.row0) +=
            (1.0 - cache.interp.weight) * d_temp.transpose();
        g.d_temporal_w.row(cache.interp.row1) +=
            cache.interp.weight * d_temp.transpose();
    }
    return g;
}

std::vector<double> trajectory_basis(int n, double t) {
    if (n < 1) throw ShapeError("trajectory_basis: need at least one control point");
    check_t(t);
    std::vector<double> phi(n, 0.0);
    if (n == 1) {
        phi[0] = 1.0;
        return phi;
    }
    const double u = t * (n - 1);
    int j = std::min(static_cast<int>(std::floor(u)), n - 2);
    double w = u - j;
    if (w < kKnotSnap) w = 0.0;
    if (w > 1.0 - kKnotSnap) {
        ++j;
        w = 0.0;
        if (j == n - 1) --j, w = 1.0;
    }
    phi[j] = 1.0 - w;
    phi[j + 1] += w;
    return phi;
}

Vec3 trajectory_eval(const TrajectoryModel& traj, double t) {
    const int n = static_cast<int>(traj.control_points.size());
    const std::vector<double> phi = trajectory_basis(n, t);
    Vec3 mu = Vec3::Zero();
    for (int i = 0; i < n; ++i) mu += phi[i] * traj.control_points[i];
    return mu;
}

} // namespace splat4d
