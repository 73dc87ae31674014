#include "splat4d/dataset.hpp"

#include <fstream>
#include <json.hpp>

#include "splat4d/rasterizer.hpp"

namespace splat4d {

using nlohmann::json;

namespace {

std::string frame_name(int cam, int frame) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "cam%d_f%04d", cam, frame);
    return buf;
}

json pose_to_json(const Mat3& r, const Vec3& t) {
    json j;
    j["rotation"] = std::vector<double>(r.data(), r.data() + 9); // column-major
    j["translation"] = std::vector<double>{t.x(), t.y(), t.z()};
    return j;
}

void pose_from_json(const json& j, Mat3& r, Vec3& t) {
    const auto rv = j.at("rotation").get<std::vector<double>>();
    const auto tv = j.at("translation").get<std::vector<double>>();
    if (rv.size() != 9 || tv.size() != 3)
        throw FormatError("manifest: malformed pose entry");
    for (int i = 0; i < 9; ++i) r.data()[i] = rv[i];
    t = Vec3(tv[0], tv[1], tv[2]);
}

} // namespace

std::filesystem::path frame_path(const std::filesystem::path& root, int cam,
                                 int frame) {
    return root / "frames" / (frame_name(cam, frame) + ".ppm");
}

std::filesystem::path mask_path(const std::filesystem::path& root, int cam, int frame,
                                int obj) {
    return root / "masks" /
           (frame_name(cam, frame) + "_obj" + std::to_string(obj) + ".pgm");
}

double DatasetObject::local_time(int frame, int total_frames) const {
    (void)total_frames;
    if (track_last <= track_first) return 0.0;
    const int f = std::clamp(frame, track_first, track_last);
    return static_cast<double>(f - track_first) / (track_last - track_first);
}

Image Dataset::load_frame(int cam, int frame) const {
    return read_ppm(frame_path(root, cam, frame));
}

Mask Dataset::load_mask(int cam, int frame, int obj) const {
    return read_pgm(mask_path(root, cam, frame, obj));
}

void write_dataset(const ScriptedScene& scene, const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    fs::create_directories(root / "frames");
    if (!scene.objects.empty()) fs::create_directories(root / "masks");

    const int frames = static_cast<int>(scene.timestamps.size());
    for (int f = 0; f < frames; ++f) {
        const GaussianSet world = scene.assemble(f);
        for (const auto& rig : scene.rigs) {
            const Camera cam = rig.camera(f);
            const RenderOutput out = render(world, cam, scene.background);
            write_ppm(out.image, frame_path(root, rig.id, f));
            for (size_t o = 0; o < scene.objects.size(); ++o) {
                const GaussianSet solo = scene.assemble_object(f, static_cast<int>(o));
                const RenderOutput alpha = render(solo, cam, Vec3::Zero());
                Mask m(cam.height, cam.width);
                for (int y = 0; y < cam.height; ++y)
                    for (int x = 0; x < cam.width; ++x)
                        m.at(y, x) = (1.0 - alpha.final_transmittance(y, x)) > 0.5;
                write_pgm(m, mask_path(root, rig.id, f, static_cast<int>(o)));
            }
        }
    }

    json j;
    j["format_version"] = 1;
    j["seed"] = scene.seed;
    j["scenario"] = scene.config.name;
    j["sh_degree"] = scene.config.sh_degree;
    j["background"] = std::vector<double>{scene.background.x(), scene.background.y(),
                                          scene.background.z()};
    j["timestamps"] = scene.timestamps;
    j["noise"] = {{"sigma_rot_deg", scene.config.sigma_rot_deg},
                  {"sigma_trans", scene.config.sigma_trans}};
    j["cameras"] = json::array();
    for (const auto& rig : scene.rigs) {
        json c;
        c["id"] = rig.id;
        c["fx"] = rig.fx;
        c["fy"] = rig.fy;
        c["cx"] = rig.cx;
        c["cy"] = rig.cy;
        c["width"] = rig.width;
        c["height"] = rig.height;
        c["poses"] = json::array();
        for (int f = 0; f < frames; ++f)
            c["poses"].push_back(pose_to_json(rig.rot[f], rig.trans[f]));
        j["cameras"].push_back(c);
    }
    j["objects"] = json::array();
    for (size_t o = 0; o < scene.objects.size(); ++o) {
        const auto& obj = scene.objects[o];
        json e;
        e["id"] = static_cast<int>(o);
        e["name"] = obj.name;
        e["speed"] = obj.speed;
        e["track_first"] = obj.track_first;
        e["track_last"] = obj.track_last;
        e["true_poses"] = json::array();
        e["tracked_poses"] = json::array();
        for (int f = 0; f < frames; ++f) {
            e["true_poses"].push_back(pose_to_json(obj.true_rot[f], obj.true_trans[f]));
            e["tracked_poses"].push_back(
                pose_to_json(obj.tracked_rot[f], obj.tracked_trans[f]));
        }
        j["objects"].push_back(e);
    }

    std::ofstream out(root / "manifest");
    if (!out) throw FormatError("cannot write manifest in " + root.string());
    out << j.dump(2) << "\n";
}

Dataset read_dataset(const std::filesystem::path& root) {
    namespace fs = std::filesystem;
    const fs::path mpath = root / "manifest";
    std::ifstream in(mpath);
    if (!in) throw FormatError("missing manifest: " + mpath.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("manifest parse error in " + mpath.string() + ": " + e.what());
    }

    Dataset ds;
    ds.root = root;
    try {
        ds.seed = j.at("seed").get<std::uint64_t>();
        ds.scenario = j.at("scenario").get<std::string>();
        ds.sh_degree = j.at("sh_degree").get<int>();
        const auto bg = j.at("background").get<std::vector<double>>();
        ds.background = Vec3(bg.at(0), bg.at(1), bg.at(2));
        ds.timestamps = j.at("timestamps").get<std::vector<double>>();
        ds.sigma_rot_deg = j.at("noise").at("sigma_rot_deg").get<double>();
        ds.sigma_trans = j.at("noise").at("sigma_trans").get<double>();
        for (const auto& c : j.at("cameras")) {
            CameraRig rig;
            rig.id = c.at("id").get<int>();
            rig.fx = c.at("fx").get<double>();
            rig.fy = c.at("fy").get<double>();
            rig.cx = c.at("cx").get<double>();
            rig.cy = c.at("cy").get<double>();
            rig.width = c.at("width").get<int>();
            rig.height = c.at("height").get<int>();
            for (const auto& p : c.at("poses")) {
                Mat3 r;
                Vec3 t;
                pose_from_json(p, r, t);
                rig.rot.push_back(r);
                rig.trans.push_back(t);
            }
            ds.rigs.push_back(std::move(rig));
        }
        for (const auto& e : j.at("objects")) {
            DatasetObject obj;
            obj.id = e.at("id").get<int>();
            obj.name = e.at("name").get<std::string>();
            obj.speed = e.at("speed").get<double>();
            obj.track_first = e.at("track_first").get<int>();
            obj.track_last = e.at("track_last").get<int>();
            for (const auto& p : e.at("true_poses")) {
                Mat3 r;
                Vec3 t;
                pose_from_json(p, r, t);
                obj.true_rot.push_back(r);
                obj.true_trans.push_back(t);
            }
            for (const auto& p : e.at("tracked_poses")) {
                Mat3 r;
                Vec3 t;
                pose_from_json(p, r, t);
                obj.tracked_rot.push_back(r);
                obj.tracked_trans.push_back(t);
            }
            ds.objects.push_back(std::move(obj));
        }
    } catch (const json::exception& e) {
        throw FormatError("manifest field error in " + mpath.string() + ": " + e.what());
    }

    // Every declared frame must exist, and no extras may be present.
    const int frames = ds.frame_count();
    size_t expected = 0;
    for (const auto& rig : ds.rigs) {
        for (int f = 0; f < frames; ++f) {
            const fs::path p = frame_path(root, rig.id, f);
            if (!fs::exists(p)) throw FormatError("missing frame image: " + p.string());
            ++expected;
        }
        if (static_cast<int>(rig.rot.size()) != frames)
            throw FormatError("manifest: camera " + std::to_string(rig.id) +
                              " pose count != frame count");
    }
    size_t actual = 0;
    for (const auto& entry : fs::directory_iterator(root / "frames"))
        if (entry.is_regular_file()) ++actual;
    if (actual != expected)
        throw FormatError("frame count mismatch in " + (root / "frames").string() +
                          ": manifest declares " + std::to_string(expected) +
                          ", found " + std::to_string(actual));
    return ds;
}

} // namespace splat4d
