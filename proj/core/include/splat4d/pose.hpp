#pragma once

#include <vector>

#include "splat4d/quat.hpp"
#include "splat4d/rasterizer.hpp"
#include "splat4d/scene.hpp"

namespace splat4d {

/// A tracked rigid pose of one dynamic object at one frame.
struct TrackedPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    int t_index = 0;
    int object_id = 0;

    void validate() const;
};

/// Dual-scale pose correction: coarse terms absorb large tracking errors,
/// fine terms the subtle residual. Axis-angle, radians.
struct PoseCorrection {
    Vec3 omega_coarse = Vec3::Zero();
    Vec3 omega_fine = Vec3::Zero();
    Vec3 dt_coarse = Vec3::Zero();
    Vec3 dt_fine = Vec3::Zero();
};

struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
};

/// R' = R exp([omega_c + omega_f]_x), T' = T + dT_c + dT_f.
/// The summed axis-angle correction keeps R' a valid rotation and makes the
/// zero correction exactly the identity. Throws DomainError when the summed
/// rotation correction reaches pi (outside the small-correction regime).
RigidTransform correct_pose(const TrackedPose& pose, const PoseCorrection& corr);

/// mu_w = R mu_o + T.
Vec3 object_to_world(const Vec3& mu_o, const Mat3& r, const Vec3& t);

/// Cache for the differentiable placement of an object-local Gaussian set
/// under a corrected pose.
struct PlacementCache {
    Vec4 q_track = kIdentityQuat;
    Vec4 q_corr = kIdentityQuat;
    Vec4 q_total = kIdentityQuat;
    Vec3 omega = Vec3::Zero();
    std::vector<Vec4> q_world_unnorm;
};

/// Applies correct_pose(pose, corr) to every Gaussian of `local`:
/// positions via the corrected rotation + translation, quaternions composed
/// with the corrected rotation; scales, opacities, SH and embeddings pass
/// through unchanged (SH is not rotated).
GaussianSet place_object(const GaussianSet& local, const TrackedPose& pose,
                         const PoseCorrection& corr, PlacementCache* cache = nullptr);

struct PlacementGrads {
    std::vector<Vec3> d_mu;   // w.r.t. local positions
    std::vector<Vec4> d_quat; // w.r.t. local quaternions
    Vec3 d_omega = Vec3::Zero();       // shared by omega_coarse and omega_fine
    Vec3 d_translation = Vec3::Zero(); // shared by dt_coarse and dt_fine
};

/// Adjoint of place_object for the position/orientation paths. Upstream
/// gradients for scale/opacity/sh pass through unchanged and are the
/// caller's responsibility.
PlacementGrads place_object_backward(const GaussianSet& local, const TrackedPose& pose,
                                     const PlacementCache& cache,
                                     const RenderGrads& upstream);

/// Geodesic rotation angle (radians) plus Euclidean translation distance.
double pose_error(const Mat3& r_a, const Vec3& t_a, const Mat3& r_b, const Vec3& t_b);

} // namespace splat4d
