#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

#include "splat4d/nn.hpp"
#include "splat4d/rasterizer.hpp"
#include "splat4d/scene.hpp"

namespace splat4d {

/// Learnable temporal embedding matrix with a progressive sample schedule:
/// the active knot count N(i) grows from n_min to n_max over total_iters.
struct TemporalEmbedding {
    Eigen::MatrixXd w; // n_max x D_t
    int n_min = 4;
    int n_max = 16;
    long total_iters = 1;
};

struct EncodingConfig {
    int pos_bands = 4;     // P frequency bands
    int temporal_dim = 16; // D_t
    int gauss_dim = 16;    // D_g

    int feature_length() const { return 3 + 6 * pos_bands + temporal_dim + gauss_dim; }
};

/// One deformation head: an MLP whose output splits into
/// [d_mu(3), d_scale(3), d_quat_raw(4), d_opacity(1), d_sh(3*(L+1)^2)].
/// output_gain scales the raw MLP output; the fine head uses a small gain
/// so it stays in the subtle-correction regime.
struct DeformHead {
    Mlp mlp;
    double output_gain = 1.0;
};

struct DualScaleDeformer {
    DeformHead coarse;
    DeformHead fine;
    TemporalEmbedding temporal;
    EncodingConfig enc;
    int sh_coeffs = 1;           // (L+1)^2, fixes the head output width
    double position_scale = 1.0; // applied to positions before encoding

    int head_output_size() const { return 11 + 3 * sh_coeffs; }

    /// Hidden layers Xavier-initialized, output layers exactly zero, so the
    /// deformer is the identity map at creation.
    static DualScaleDeformer create(const EncodingConfig& enc, int n_min, int n_max,
                                    long total_iters, int sh_coeffs, int hidden_width,
                                    int hidden_depth, double fine_gain,
                                    std::mt19937_64& rng);
};

/// Ablation switches; disabling a component zeroes exactly that feature or
/// head and freezes its parameters, leaving every shape unchanged.
struct DeformSwitches {
    bool use_gauss_embed = true;
    bool use_temporal = true;
    bool use_coarse = true;
    bool use_fine = true;
};

/// [mu, {sin(2^i pi mu), cos(2^i pi mu)} for i = 0..bands-1], length 3+6*bands.
Eigen::VectorXd positional_encode(const Vec3& mu, int bands);

/// Adjoint of positional_encode.
Vec3 positional_encode_backward(const Vec3& mu, int bands,
                                const Eigen::Ref<const Eigen::VectorXd>& d_feat);

/// Staircase schedule N(i) = n_min + floor((n_max - n_min) * i / total_iters).
int schedule_samples(long iter, const TemporalEmbedding& emb);

/// Which embedding rows bracket t among the N(iter) active knots, and the
/// interpolation weight of the right row.
struct TemporalInterp {
    int row0 = 0, row1 = 0;
    double weight = 0.0;
};
TemporalInterp temporal_interp(double t, long iter, const TemporalEmbedding& emb);

/// Linear interpolation of the active knot rows at t in [0,1].
Eigen::VectorXd temporal_embed(double t, long iter, const TemporalEmbedding& emb);

/// [F_pos(mu), F_temp(t), z] in that order.
Eigen::VectorXd aggregate_features(const Vec3& mu, double t,
                                   const Eigen::Ref<const Eigen::VectorXd>& z,
                                   long iter, const TemporalEmbedding& temporal,
                                   const EncodingConfig& enc);

/// normalize(identity + raw); the zero delta is exactly the identity rotation.
Vec4 quaternion_delta(const Vec4& raw);

/// Everything deform_backward needs, produced by the paired forward call.
struct DeformCache {
    double t = 0;
    long iter = 0;
    DeformSwitches switches;
    TemporalInterp interp;
    Eigen::VectorXd temporal_feature; // D_t (zeroed when temporal disabled)
    int block_size = 0;
    std::vector<Mlp::Cache> coarse_caches; // one per sample block
    std::vector<Mlp::Cache> fine_caches;
    Eigen::MatrixXd out_c, out_f; // head outputs after gain, head_out x K
    std::vector<Vec4> delta_c, delta_f, q_unnormalized;
    std::vector<Vec3> scale_preclamp;
    std::vector<double> opacity_preclamp;
};

/// Maps canonical Gaussians to their state at time t (Gaussian embeddings
/// ride along unchanged). The coarse head sees features at mu, the fine head
/// at mu + d_mu_coarse with the same temporal and per-Gaussian components.
GaussianSet deform(const GaussianSet& scene, double t, long iter,
                   const DualScaleDeformer& d, const DeformSwitches& sw = {},
                   DeformCache* cache = nullptr);

struct DeformGrads {
    std::vector<Vec3> d_mu, d_scale;
    std::vector<Vec4> d_quat;
    std::vector<double> d_opacity;
    Eigen::MatrixXd d_sh;
    Eigen::MatrixXd d_embed;      // K x D_g
    Eigen::MatrixXd d_temporal_w; // n_max x D_t
    std::vector<MlpLayer> d_coarse, d_fine;

    static DeformGrads zeros(const GaussianSet& scene, const DualScaleDeformer& d);
};

/// Exact adjoint of deform. `upstream` carries gradients w.r.t. the deformed
/// parameters (its d_background is ignored).
DeformGrads deform_backward(const GaussianSet& scene, const DualScaleDeformer& d,
                            const DeformCache& cache, const RenderGrads& upstream);

/// Piecewise-linear trajectory on uniform knots over [0,1].
struct TrajectoryModel {
    std::vector<Vec3> control_points; // N >= 1
};

/// Hat-function basis values phi_i(t); a partition of unity on [0,1].
std::vector<double> trajectory_basis(int n, double t);

/// mu(t) = sum_i p_i phi_i(t); exact at knots.
Vec3 trajectory_eval(const TrajectoryModel& traj, double t);

inline constexpr double kMinScale = 1e-6; // post-deformation scale floor

} // namespace splat4d
