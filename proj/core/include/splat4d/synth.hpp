#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "splat4d/deform.hpp"
#include "splat4d/pose.hpp"
#include "splat4d/scene.hpp"

namespace splat4d {

/// Scenario knobs for the scripted ground-truth worlds. The default
/// "dual_speed" scene is a static ground + backdrop with one fast vehicle-like
/// cluster and one slow pedestrian-like cluster (speed ratio >= 3).
struct ScenarioConfig {
    std::string name = "dual_speed"; // dual_speed | toy_supervised | static_only
    int frames = 40;
    int cameras = 1;
    int width = 96, height = 64;
    double speed_ratio = 5.0;   // fast object speed / slow object speed
    double sigma_rot_deg = 0.0; // tracked-pose rotation noise, per axis
    double sigma_trans = 0.0;   // tracked-pose translation noise, per axis
    int sh_degree = 1;
};

struct ScriptedObject {
    std::string name;
    TrajectoryModel trajectory; // cluster-center translation over t in [0,1]
    double speed = 0.0;         // path length per unit time
    GaussianSet local;          // object-local Gaussians, centered at origin
    int track_first = 0, track_last = 0;
    std::vector<Mat3> true_rot;
    std::vector<Vec3> true_trans;
    std::vector<Mat3> tracked_rot; // noisy observations of the true poses
    std::vector<Vec3> tracked_trans;
};

/// Intrinsics plus a world-to-camera pose per frame.
struct CameraRig {
    int id = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;
    std::vector<Mat3> rot;
    std::vector<Vec3> trans;

    Camera camera(int frame) const;
};

struct ScriptedScene {
    ScenarioConfig config;
    std::uint64_t seed = 0;
    GaussianSet statics;
    std::vector<ScriptedObject> objects;
    std::vector<CameraRig> rigs;
    std::vector<double> timestamps; // strictly increasing, in [0,1]
    Vec3 background = Vec3::Zero();

    /// World-space Gaussians at a frame: statics plus every object placed at
    /// its true pose.
    GaussianSet assemble(int frame) const;

    /// One object alone at its true pose (mask rendering).
    GaussianSet assemble_object(int frame, int obj) const;
};

/// Deterministic scene from a seed. Dynamic object positions obey
/// mu(t) = mu(0) + v t on constant-velocity trajectories.
ScriptedScene generate_scene(std::uint64_t seed, const ScenarioConfig& cfg);

/// Rigidly transform a Gaussian set (positions and orientations; SH is not
/// rotated).
GaussianSet transform_set(const GaussianSet& g, const Mat3& r, const Vec3& t);

/// Concatenate Gaussian sets (same SH degree and embedding width).
GaussianSet concat_sets(const std::vector<const GaussianSet*>& parts);

} // namespace splat4d
