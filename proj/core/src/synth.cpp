#include "splat4d/synth.hpp"

#include <cmath>
#include <random>

#include "splat4d/quat.hpp"
#include "splat4d/sh.hpp"

namespace splat4d {

namespace {

constexpr double kShDc = 1.0 / 0.28209479177387814; // coefficient for color 1.0

struct Builder {
    int sh_degree;
    std::mt19937_64& rng;
    std::vector<Vec3> mu, scale;
    std::vector<double> opacity;
    std::vector<Eigen::RowVectorXd> sh_rows;

    Builder(int degree, std::mt19937_64& r) : sh_degree(degree), rng(r) {}

    double uniform(double lo, double hi) {
        return std::uniform_real_distribution<double>(lo, hi)(rng);
    }
    double normal(double sigma) {
        return std::normal_distribution<double>(0.0, sigma)(rng);
    }

    void add(const Vec3& mu_, const Vec3& scale_, const Vec3& color, double opacity_,
             double band1_noise = 0.0) {
        mu.push_back(mu_);
        scale.push_back(scale_);
        opacity.push_back(opacity_);
        const int coeffs = (sh_degree + 1) * (sh_degree + 1);
        Eigen::RowVectorXd sh = Eigen::RowVectorXd::Zero(3 * coeffs);
        for (int c = 0; c < 3; ++c) sh[c] = color[c] * kShDc;
        if (sh_degree >= 1 && band1_noise > 0.0)
            for (int i = 3; i < 12 && i < sh.size(); ++i) sh[i] = normal(band1_noise);
        sh_rows.push_back(std::move(sh));
    }

    GaussianSet finish() const {
        const int k = static_cast<int>(mu.size());
        GaussianSet set = GaussianSet::zeros(k, sh_degree, 0);
        set.mu = mu;
        set.scale = scale;
        set.opacity = opacity;
        for (int i = 0; i < k; ++i) set.sh.row(i) = sh_rows[i];
        return set;
    }
};

GaussianSet build_statics(const ScenarioConfig& cfg, std::mt19937_64& rng, int gx,
                          int gz, int bx, int by) {
    Builder b(cfg.sh_degree, rng);
    // Ground plane y = +1.1 (image y points down), mottled earth tones.
    for (int iz = 0; iz < gz; ++iz) {
        for (int ix = 0; ix < gx; ++ix) {
            const double x = -5.0 + 10.0 * (ix + 0.5) / gx + b.normal(0.04);
            const double z = 5.0 + 7.0 * (iz + 0.5) / gz + b.normal(0.04);
            const double y = 1.1 + b.normal(0.01);
            const double shade = b.uniform(0.25, 0.5);
            const Vec3 color(shade + b.uniform(0.0, 0.08), shade,
                             shade - b.uniform(0.0, 0.08));
            b.add(Vec3(x, y, z),
                  Vec3(0.26 * b.uniform(0.8, 1.2), 0.05, 0.28 * b.uniform(0.8, 1.2)),
                  color, b.uniform(0.85, 0.97), 0.05);
        }
    }
    // Backdrop plane z = 12.2, sky-to-wall gradient.
    for (int iy = 0; iy < by; ++iy) {
        for (int ix = 0; ix < bx; ++ix) {
            const double x = -5.4 + 10.8 * (ix + 0.5) / bx + b.normal(0.04);
            const double y = -2.6 + 3.9 * (iy + 0.5) / by + b.normal(0.03);
            const double sky = std::clamp(0.5 - y * 0.16, 0.0, 1.0);
            const Vec3 color(0.35 + 0.12 * sky + b.normal(0.02),
                             0.42 + 0.18 * sky + b.normal(0.02),
                             0.55 + 0.25 * sky + b.normal(0.02));
            b.add(Vec3(x, y, 12.2), Vec3(0.30, 0.30, 0.06),
                  color.cwiseMax(0.0).cwiseMin(1.0), b.uniform(0.9, 0.98), 0.04);
        }
    }
    return b.finish();
}

GaussianSet build_box_cluster(int sh_degree, std::mt19937_64& rng, const Vec3& half,
                              const Vec3& base_color, int count) {
    Builder b(sh_degree, rng);
    for (int i = 0; i < count; ++i) {
        const Vec3 p(b.uniform(-half.x(), half.x()), b.uniform(-half.y(), half.y()),
                     b.uniform(-half.z(), half.z()));
        Vec3 color = base_color + Vec3(b.normal(0.08), b.normal(0.08), b.normal(0.08));
        color = color.cwiseMax(0.05).cwiseMin(0.95);
        const Vec3 scale = Vec3(half.x(), half.y(), half.z()).cwiseMax(0.05) * 0.38 *
                           b.uniform(0.7, 1.3);
        b.add(p, scale.cwiseMin(0.35), color, b.uniform(0.82, 0.96), 0.06);
    }
    return b.finish();
}

ScriptedObject make_object(const std::string& name, GaussianSet local,
                           const std::vector<Vec3>& waypoints, int frames,
                           const std::vector<double>& timestamps,
                           const ScenarioConfig& cfg, std::mt19937_64& rng) {
    ScriptedObject obj;
    obj.name = name;
    obj.local = std::move(local);
    obj.trajectory.control_points = waypoints;
    double len = 0.0;
    for (size_t i = 0; i + 1 < waypoints.size(); ++i)
        len += (waypoints[i + 1] - waypoints[i]).norm();
    obj.speed = len;
    obj.track_first = 0;
    obj.track_last = frames - 1;

    const double sigma_rot = cfg.sigma_rot_deg * M_PI / 180.0;
    std::normal_distribution<double> rot_noise(0.0, sigma_rot);
    std::normal_distribution<double> trans_noise(0.0, cfg.sigma_trans);
    for (int f = 0; f < frames; ++f) {
        obj.true_rot.push_back(Mat3::Identity());
        obj.true_trans.push_back(trajectory_eval(obj.trajectory, timestamps[f]));
        Vec3 w = Vec3::Zero(), dt = Vec3::Zero();
        if (sigma_rot > 0.0) w = Vec3(rot_noise(rng), rot_noise(rng), rot_noise(rng));
        if (cfg.sigma_trans > 0.0)
            dt = Vec3(trans_noise(rng), trans_noise(rng), trans_noise(rng));
        obj.tracked_rot.push_back(obj.true_rot.back() * rotation_exp(w));
        obj.tracked_trans.push_back(obj.true_trans.back() + dt);
    }
    return obj;
}

CameraRig make_rig(int id, double fx, int width, int height, const Vec3& offset,
                   int frames) {
    CameraRig rig;
    rig.id = id;
    rig.fx = rig.fy = fx;
    rig.cx = width / 2.0;
    rig.cy = height / 2.0;
    rig.width = width;
    rig.height = height;
    rig.rot.assign(frames, Mat3::Identity());
    rig.trans.assign(frames, offset);
    return rig;
}

} // namespace

Camera CameraRig::camera(int frame) const {
    Camera cam;
    cam.fx = fx;
    cam.fy = fy;
    cam.cx = cx;
    cam.cy = cy;
    cam.width = width;
    cam.height = height;
    cam.rotation = rot.at(frame);
    cam.translation = trans.at(frame);
    return cam;
}

GaussianSet transform_set(const GaussianSet& g, const Mat3& r, const Vec3& t) {
    GaussianSet out = g;
    const Vec4 q_r = quat_from_rotation(r);
    for (int i = 0; i < g.count(); ++i) {
        out.mu[i] = r * g.mu[i] + t;
        const Vec4 u = hamilton(q_r, g.quat[i]);
        out.quat[i] = u / u.norm();
    }
    return out;
}

GaussianSet concat_sets(const std::vector<const GaussianSet*>& parts) {
    if (parts.empty()) throw ShapeError("concat_sets: nothing to concatenate");
    GaussianSet out;
    out.sh_degree = parts[0]->sh_degree;
    int k = 0;
    for (const GaussianSet* p : parts) {
        if (p->sh_degree != out.sh_degree || p->embed.cols() != parts[0]->embed.cols())
            throw ShapeError("concat_sets: SH degree or embedding width mismatch");
        k += p->count();
    }
    out.mu.reserve(k);
    out.sh = Eigen::MatrixXd(k, parts[0]->sh.cols());
    out.embed = Eigen::MatrixXd(k, parts[0]->embed.cols());
    int row = 0;
    for (const GaussianSet* p : parts) {
        for (int i = 0; i < p->count(); ++i) {
            out.mu.push_back(p->mu[i]);
            out.scale.push_back(p->scale[i]);
            out.quat.push_back(p->quat[i]);
            out.opacity.push_back(p->opacity[i]);
            out.sh.row(row) = p->sh.row(i);
            if (out.embed.cols() > 0) out.embed.row(row) = p->embed.row(i);
            ++row;
        }
    }
    return out;
}

GaussianSet ScriptedScene::assemble(int frame) const {
    std::vector<GaussianSet> placed;
    placed.reserve(objects.size());
    for (const auto& obj : objects)
        placed.push_back(
            transform_set(obj.local, obj.true_rot.at(frame), obj.true_trans.at(frame)));
    std::vector<const GaussianSet*> parts{&statics};
    for (const auto& p : placed) parts.push_back(&p);
    return concat_sets(parts);
}

GaussianSet ScriptedScene::assemble_object(int frame, int obj) const {
    const auto& o = objects.at(obj);
    return transform_set(o.local, o.true_rot.at(frame), o.true_trans.at(frame));
}

ScriptedScene generate_scene(std::uint64_t seed, const ScenarioConfig& cfg) {
    if (cfg.frames < 2) throw ConfigError("scenario: need at least 2 frames");
    if (cfg.cameras < 1 || cfg.cameras > 3)
        throw ConfigError("scenario: cameras must be 1..3");
    if (cfg.name != "dual_speed" && cfg.name != "toy_supervised" &&
        cfg.name != "static_only")
        throw ConfigError("unknown scenario '" + cfg.name + "'");
    if (cfg.name == "dual_speed" && cfg.speed_ratio < 3.0)
        throw ConfigError("dual_speed: speed ratio must be >= 3");

    ScriptedScene scene;
    scene.config = cfg;
    scene.seed = seed;
    scene.background = Vec3(0.62, 0.70, 0.84);
    std::mt19937_64 rng(seed);

    for (int f = 0; f < cfg.frames; ++f)
        scene.timestamps.push_back(static_cast<double>(f) / (cfg.frames - 1));

    const double fx = cfg.name == "toy_supervised" ? 80.0 : 110.0;
    for (int c = 0; c < cfg.cameras; ++c) {
        const double baseline = (c - (cfg.cameras - 1) / 2.0) * 0.5;
        scene.rigs.push_back(
            make_rig(c, fx, cfg.width, cfg.height, Vec3(baseline, 0, 0), cfg.frames));
    }

    if (cfg.name == "dual_speed") {
        scene.statics = build_statics(cfg, rng, 48, 28, 40, 14);
        GaussianSet vehicle =
            build_box_cluster(cfg.sh_degree, rng, Vec3(0.8, 0.25, 0.4),
                              Vec3(0.75, 0.18, 0.15), 60);
        const double fast_disp = 6.4;
        scene.objects.push_back(make_object(
            "vehicle", std::move(vehicle),
            {Vec3(-3.2, 0.82, 8.0), Vec3(-3.2 + fast_disp, 0.82, 8.0)}, cfg.frames,
            scene.timestamps, cfg, rng));
        GaussianSet walker =
            build_box_cluster(cfg.sh_degree, rng, Vec3(0.14, 0.45, 0.14),
                              Vec3(0.2, 0.3, 0.7), 30);
        const double slow_disp = fast_disp / cfg.speed_ratio;
        scene.objects.push_back(make_object(
            "pedestrian", std::move(walker),
            {Vec3(2.5, 0.62, 6.8), Vec3(2.5 - slow_disp, 0.62, 6.8)}, cfg.frames,
            scene.timestamps, cfg, rng));
    } else if (cfg.name == "toy_supervised") {
        scene.statics = build_statics(cfg, rng, 20, 12, 16, 8);
        GaussianSet vehicle =
            build_box_cluster(cfg.sh_degree, rng, Vec3(0.7, 0.25, 0.35),
                              Vec3(0.78, 0.2, 0.12), 48);
        scene.objects.push_back(make_object(
            "vehicle", std::move(vehicle),
            {Vec3(-2.0, 0.8, 7.0), Vec3(2.0, 0.8, 7.0)}, cfg.frames,
            scene.timestamps, cfg, rng));
    } else { // static_only
        scene.statics = build_statics(cfg, rng, 16, 10, 12, 6);
    }
    return scene;
}

} // namespace splat4d
