#pragma once

#include <filesystem>

#include "splat4d/image.hpp"
#include "splat4d/synth.hpp"

namespace splat4d {

/// On-disk dataset layout:
///   <root>/manifest                  JSON: cameras, frames, objects, noise, seed
///   <root>/frames/cam{c}_f{idx}.ppm  8-bit RGB renders, zero-padded indices
///   <root>/masks/cam{c}_f{idx}_obj{k}.pgm  object footprint masks
struct DatasetObject {
    int id = 0;
    std::string name;
    double speed = 0.0;
    int track_first = 0, track_last = 0;
    std::vector<Mat3> true_rot;
    std::vector<Vec3> true_trans;
    std::vector<Mat3> tracked_rot;
    std::vector<Vec3> tracked_trans;

    /// Timestamp normalized to this object's tracked duration.
    double local_time(int frame, int total_frames) const;
};

struct Dataset {
    std::filesystem::path root;
    std::uint64_t seed = 0;
    std::string scenario;
    Vec3 background = Vec3::Zero();
    int sh_degree = 0;
    double sigma_rot_deg = 0.0, sigma_trans = 0.0;
    std::vector<double> timestamps;
    std::vector<CameraRig> rigs;
    std::vector<DatasetObject> objects;

    int frame_count() const { return static_cast<int>(timestamps.size()); }
    int camera_count() const { return static_cast<int>(rigs.size()); }
    bool has_tracks() const { return !objects.empty(); }

    Image load_frame(int cam, int frame) const;
    Mask load_mask(int cam, int frame, int obj) const;
};

std::filesystem::path frame_path(const std::filesystem::path& root, int cam, int frame);
std::filesystem::path mask_path(const std::filesystem::path& root, int cam, int frame,
                                int obj);

/// Renders every ground-truth frame (and object masks) and writes the
/// manifest. Floating-point manifest values round-trip exactly.
void write_dataset(const ScriptedScene& scene, const std::filesystem::path& root);

/// Throws FormatError (naming the file) on missing images or a
/// manifest/image count mismatch.
Dataset read_dataset(const std::filesystem::path& root);

} // namespace splat4d
