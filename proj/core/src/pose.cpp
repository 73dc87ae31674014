#include "splat4d/pose.hpp"

#include <cmath>

namespace splat4d {

void TrackedPose::validate() const {
    const Mat3 rtr = rotation.transpose() * rotation;
    if ((rtr - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6 ||
        std::abs(rotation.determinant() - 1.0) > 1e-6)
        throw DomainError("TrackedPose: rotation is not a proper rotation");
}

namespace {

Vec3 summed_omega(const PoseCorrection& corr) {
    const Vec3 omega = corr.omega_coarse + corr.omega_fine;
    if (omega.norm() >= M_PI)
        throw DomainError("pose correction outside the small-rotation regime "
                          "(|omega_c + omega_f| >= pi)");
    return omega;
}

} // namespace

RigidTransform correct_pose(const TrackedPose& pose, const PoseCorrection& corr) {
    pose.validate();
    const Vec3 omega = summed_omega(corr);
    RigidTransform out;
    out.rotation = pose.rotation * rotation_exp(omega);
    out.translation = pose.translation + corr.dt_coarse + corr.dt_fine;
    return out;
}

Vec3 object_to_world(const Vec3& mu_o, const Mat3& r, const Vec3& t) {
    return r * mu_o + t;
}

GaussianSet place_object(const GaussianSet& local, const TrackedPose& pose,
                         const PoseCorrection& corr, PlacementCache* cache) {
    local.validate();
    pose.validate();
    const Vec3 omega = summed_omega(corr);
    const Vec4 q_track = quat_from_rotation(pose.rotation);
    const Vec4 q_corr = axis_angle_quat(omega);
    const Vec4 q_total = hamilton(q_track, q_corr);
    const Mat3 r_total = rotation_from_quat(q_total);
    const Vec3 t_total = pose.translation + corr.dt_coarse + corr.dt_fine;

    GaussianSet world = local;
    if (cache) {
        cache->q_track = q_track;
        cache->q_corr = q_corr;
        cache->q_total = q_total;
        cache->omega = omega;
        cache->q_world_unnorm.assign(local.count(), kIdentityQuat);
    }
    for (int i = 0; i < local.count(); ++i) {
        world.mu[i] = r_total * local.mu[i] + t_total;
        const Vec4 u = hamilton(q_total, local.quat[i]);
        if (cache) cache->q_world_unnorm[i] = u;
        world.quat[i] = u / u.norm();
    }
    return world;
}

PlacementGrads place_object_backward(const GaussianSet& local, const TrackedPose& pose,
                                     const PlacementCache& cache,
                                     const RenderGrads& upstream) {
    const int k = local.count();
    if (static_cast<int>(upstream.d_mu.size()) != k)
        throw ShapeError("place_object_backward: upstream shape mismatch");
    (void)pose;

    PlacementGrads g;
    g.d_mu.assign(k, Vec3::Zero());
    g.d_quat.assign(k, Vec4::Zero());

    const Mat3 r_total = rotation_from_quat(cache.q_total);
    const auto dr = rotation_from_quat_derivatives(cache.q_total);
    Vec4 d_q_total = Vec4::Zero();

    for (int i = 0; i < k; ++i) {
        // mu_w = R(q_total) mu_o + t_total
        g.d_mu[i] = r_total.transpose() * upstream.d_mu[i];
        g.d_translation += upstream.d_mu[i];
        for (int c = 0; c < 4; ++c)
            d_q_total[c] += upstream.d_mu[i].dot(dr[c] * local.mu[i]);

        // q_w = normalize(q_total (x) q_o)
        const Vec4 d_u =
            normalize_quat_backward(cache.q_world_unnorm[i], upstream.d_quat[i]);
        d_q_total += hamilton_right_matrix(local.quat[i]).transpose() * d_u;
        g.d_quat[i] = hamilton_left_matrix(cache.q_total).transpose() * d_u;
    }

    // q_total = q_track (x) q_corr, q_corr = axis_angle_quat(omega)
    const Vec4 d_q_corr = hamilton_left_matrix(cache.q_track).transpose() * d_q_total;
    g.d_omega = axis_angle_quat_jacobian(cache.omega).transpose() * d_q_corr;
    return g;
}

double pose_error(const Mat3& r_a, const Vec3& t_a, const Mat3& r_b, const Vec3& t_b) {
    const Mat3 rel = r_a.transpose() * r_b;
    const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
    return std::acos(c) + (t_a - t_b).norm();
}

} // namespace splat4d
