#include "splat4d/train.hpp"

#include <cmath>
#include <cstdio>

#include "splat4d/metrics.hpp"
#include "splat4d/parallel.hpp"
#include "splat4d/quat.hpp"
#include "splat4d/rasterizer.hpp"
#include "splat4d/synth.hpp"

namespace splat4d {

namespace {
constexpr double kGrayDc = 0.5 / 0.28209479177387814; // SH dc for 0.5 gray
}

void TrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("config: iterations must be >= 1");
    if (!(lambda_ssim >= 0.0 && lambda_ssim <= 1.0))
        throw ConfigError("config: lambda_ssim must lie in [0,1]");
    for (double lr : {lr_position, lr_scale, lr_quat, lr_opacity, lr_sh, lr_embed,
                      lr_temporal, lr_deform, lr_pose})
        if (!(lr > 0.0)) throw ConfigError("config: learning rates must be positive");
    if (pos_bands < 0 || temporal_dim < 1 || gauss_dim < 1)
        throw ConfigError("config: bad encoding dimensions");
    if (n_min < 1 || n_min > n_max) throw ConfigError("config: need 1 <= n_min <= n_max");
    if (head_width < 1 || head_depth < 1) throw ConfigError("config: bad head size");
    if (mode != "self" && mode != "supervised")
        throw ConfigError("config: mode must be 'self' or 'supervised'");
    if (split != "10th" && split != "4th")
        throw ConfigError("config: split must be '10th' or '4th'");
}

bool is_heldout_frame(int frame, const std::string& split) {
    const int stride = split == "4th" ? 4 : 10;
    return frame % stride == 0;
}

std::vector<int> train_frames(int total, const std::string& split) {
    std::vector<int> out;
    for (int f = 0; f < total; ++f)
        if (!is_heldout_frame(f, split)) out.push_back(f);
    return out;
}

std::vector<int> heldout_frames(int total, const std::string& split) {
    std::vector<int> out;
    for (int f = 0; f < total; ++f)
        if (is_heldout_frame(f, split)) out.push_back(f);
    return out;
}

ScenarioConfig scenario_from_dataset(const Dataset& ds) {
    ScenarioConfig cfg;
    cfg.name = ds.scenario;
    cfg.frames = ds.frame_count();
    cfg.cameras = ds.camera_count();
    cfg.width = ds.rigs.at(0).width;
    cfg.height = ds.rigs.at(0).height;
    cfg.sigma_rot_deg = ds.sigma_rot_deg;
    cfg.sigma_trans = ds.sigma_trans;
    cfg.sh_degree = ds.sh_degree;
    if (ds.objects.size() >= 2) {
        double fast = 0.0, slow = std::numeric_limits<double>::infinity();
        for (const auto& o : ds.objects) {
            fast = std::max(fast, o.speed);
            slow = std::min(slow, o.speed);
        }
        if (slow > 0.0) cfg.speed_ratio = fast / slow;
    }
    return cfg;
}

struct Trainer::ForwardCapture {
    int cam = 0, frame = 0;
    long sched_iter = 0;
    Camera camera;
    GaussianSet world;
    std::vector<GaussianSet> local_deformed; // supervised, per object
    std::vector<DeformCache> dcaches;
    std::vector<PlacementCache> pcaches;
    Image d_image;
    double l1_term = 0, ssim_term = 0;
};

Trainer::Trainer(Dataset dataset, TrainConfig config)
    : dataset_(std::move(dataset)), config_(std::move(config)) {
    config_.validate();
    if (config_.strict_sequential) set_strict_sequential(true);
    if (config_.mode == "supervised" && dataset_.objects.empty())
        throw ConfigError("supervised mode needs tracked objects in the dataset");
    sampler_.seed(config_.seed);
    init_model();
    build_registry();
    // preload targets
    const int f_count = dataset_.frame_count();
    frames_.resize(static_cast<size_t>(dataset_.camera_count()) * f_count);
    for (int c = 0; c < dataset_.camera_count(); ++c)
        for (int f = 0; f < f_count; ++f)
            frames_[static_cast<size_t>(c) * f_count + f] = dataset_.load_frame(c, f);
}

void Trainer::init_model() {
    const ScenarioConfig scenario = scenario_from_dataset(dataset_);
    const ScriptedScene scripted = generate_scene(dataset_.seed, scenario);
    std::mt19937_64 rng(config_.seed ^ 0x9e3779b97f4a7c15ull);
    std::normal_distribution<double> pos_noise(0.0, config_.init_position_noise);
    std::normal_distribution<double> embed_init(0.0, config_.init_embed_sigma);

    const auto init_from = [&](const GaussianSet& base) {
        GaussianSet g = GaussianSet::zeros(base.count(), base.sh_degree,
                                           config_.gauss_dim);
        for (int i = 0; i < base.count(); ++i) {
            g.mu[i] = base.mu[i] + Vec3(pos_noise(rng), pos_noise(rng), pos_noise(rng));
            g.scale[i] = Vec3::Constant(config_.init_scale);
            g.quat[i] = kIdentityQuat;
            g.opacity[i] = config_.init_opacity;
            for (int c = 0; c < 3; ++c) g.sh(i, c) = kGrayDc;
            for (int d = 0; d < config_.gauss_dim; ++d) g.embed(i, d) = embed_init(rng);
        }
        return g;
    };

    if (config_.mode == "self") {
        // canonical = full world at t = 0, perturbed
        scene_ = init_from(scripted.assemble(0));
    } else {
        scene_ = init_from(scripted.statics);
        object_local_.clear();
        for (const auto& obj : scripted.objects)
            object_local_.push_back(init_from(obj.local));
        corrections_.assign(dataset_.objects.size(),
                            std::vector<PoseCorrection>(dataset_.frame_count()));
    }

    EncodingConfig enc;
    enc.pos_bands = config_.pos_bands;
    enc.temporal_dim = config_.temporal_dim;
    enc.gauss_dim = config_.gauss_dim;
    deformer_ = DualScaleDeformer::create(
        enc, config_.n_min, config_.n_max, config_.iterations,
        scene_.sh_coeff_count(), config_.head_width, config_.head_depth,
        config_.fine_gain, rng);
    deformer_.position_scale = config_.position_scale;
}

void Trainer::build_registry() {
    registry_.clear();
    const auto add = [&](const std::string& name, double* data, Eigen::Index size,
                         double lr) {
        Tensor t;
        t.name = name;
        t.data = data;
        t.size = size;
        t.lr = lr;
        t.state.init(size);
        registry_.push_back(std::move(t));
    };
    const auto add_set = [&](const std::string& prefix, GaussianSet& g) {
        const int k = g.count();
        add(prefix + ".mu", g.mu[0].data(), 3 * k, config_.lr_position);
        add(prefix + ".scale", g.scale[0].data(), 3 * k, config_.lr_scale);
        add(prefix + ".quat", g.quat[0].data(), 4 * k, config_.lr_quat);
        add(prefix + ".opacity", g.opacity.data(), k, config_.lr_opacity);
        add(prefix + ".sh", g.sh.data(), g.sh.size(), config_.lr_sh);
        add(prefix + ".embed", g.embed.data(), g.embed.size(), config_.lr_embed);
    };
    add_set("scene", scene_);
    for (size_t o = 0; o < object_local_.size(); ++o)
        add_set("object" + std::to_string(o), object_local_[o]);
    for (size_t o = 0; o < corrections_.size(); ++o)
        add("corrections" + std::to_string(o), corrections_[o][0].omega_coarse.data(),
            static_cast<Eigen::Index>(corrections_[o].size()) * 12, config_.lr_pose);
    add("temporal.w", deformer_.temporal.w.data(), deformer_.temporal.w.size(),
        config_.lr_temporal);
    const auto add_head = [&](const std::string& prefix, Mlp& mlp) {
        auto& layers = mlp.mutable_layers();
        for (size_t l = 0; l < layers.size(); ++l) {
            add(prefix + ".l" + std::to_string(l) + ".w", layers[l].w.data(),
                layers[l].w.size(), config_.lr_deform);
            add(prefix + ".l" + std::to_string(l) + ".b", layers[l].b.data(),
                layers[l].b.size(), config_.lr_deform);
        }
    };
    add_head("coarse", deformer_.coarse.mlp);
    add_head("fine", deformer_.fine.mlp);
}

std::vector<ParamBlock> Trainer::parameter_blocks() {
    std::vector<ParamBlock> blocks;
    blocks.reserve(registry_.size());
    for (auto& t : registry_) blocks.push_back({t.name, t.data, t.size});
    return blocks;
}

void Trainer::sample(long iter, int& cam, int& frame) {
    (void)iter;
    const std::vector<int> frames = train_frames(dataset_.frame_count(), config_.split);
    const std::uint64_t u = sampler_();
    const std::uint64_t n = static_cast<std::uint64_t>(frames.size()) *
                            static_cast<std::uint64_t>(dataset_.camera_count());
    const std::uint64_t pick = u % n;
    frame = frames[pick / dataset_.camera_count()];
    cam = static_cast<int>(pick % dataset_.camera_count());
}

GaussianSet Trainer::assemble_world(double t, int pose_frame, long sched_iter,
                                    std::vector<DeformCache>* caches,
                                    std::vector<PlacementCache>* pcaches) {
    if (config_.mode == "self") {
        if (caches) {
            caches->resize(1);
            return deform(scene_, t, sched_iter, deformer_, config_.switches,
                          &(*caches)[0]);
        }
        return deform(scene_, t, sched_iter, deformer_, config_.switches);
    }
    // supervised: statics stay canonical; objects deform in local coordinates
    // on their tracked-duration clock and are placed by corrected poses.
    if (caches) caches->resize(object_local_.size());
    if (pcaches) pcaches->resize(object_local_.size());
    std::vector<GaussianSet> placed;
    for (size_t o = 0; o < object_local_.size(); ++o) {
        const auto& dso = dataset_.objects[o];
        const double t_local = dso.local_time(pose_frame, dataset_.frame_count());
        GaussianSet local_def =
            deform(object_local_[o], t_local, sched_iter, deformer_, config_.switches,
                   caches ? &(*caches)[o] : nullptr);
        TrackedPose pose;
        pose.rotation = dso.tracked_rot.at(pose_frame);
        pose.translation = dso.tracked_trans.at(pose_frame);
        pose.t_index = pose_frame;
        pose.object_id = dso.id;
        placed.push_back(place_object(local_def, pose, corrections_[o][pose_frame],
                                      pcaches ? &(*pcaches)[o] : nullptr));
    }
    std::vector<const GaussianSet*> parts{&scene_};
    for (const auto& p : placed) parts.push_back(&p);
    return concat_sets(parts);
}

double Trainer::forward(int cam, int frame, ForwardCapture* cap, Image* out_image) {
    const double t = dataset_.timestamps.at(frame);
    const long sched_iter = std::min(iteration_, config_.iterations);
    std::vector<DeformCache> dcaches;
    std::vector<PlacementCache> pcaches;
    std::vector<GaussianSet> local_deformed;

    GaussianSet world;
    if (cap && config_.mode == "supervised") {
        // keep the deformed locals: the placement adjoint needs them
        dcaches.resize(object_local_.size());
        pcaches.resize(object_local_.size());
        std::vector<GaussianSet> placed;
        for (size_t o = 0; o < object_local_.size(); ++o) {
            const auto& dso = dataset_.objects[o];
            const double t_local = dso.local_time(frame, dataset_.frame_count());
            local_deformed.push_back(deform(object_local_[o], t_local, sched_iter,
                                            deformer_, config_.switches, &dcaches[o]));
            TrackedPose pose;
            pose.rotation = dso.tracked_rot.at(frame);
            pose.translation = dso.tracked_trans.at(frame);
            pose.t_index = frame;
            pose.object_id = dso.id;
            placed.push_back(place_object(local_deformed.back(), pose,
                                          corrections_[o][frame], &pcaches[o]));
        }
        std::vector<const GaussianSet*> parts{&scene_};
        for (const auto& p : placed) parts.push_back(&p);
        world = concat_sets(parts);
    } else {
        world = assemble_world(t, frame, sched_iter, cap ? &dcaches : nullptr,
                               cap ? &pcaches : nullptr);
    }

    const Camera camera = dataset_.rigs.at(cam).camera(frame);
    const RenderOutput out = render(world, camera, dataset_.background);
    const Image& target =
        frames_.at(static_cast<size_t>(cam) * dataset_.frame_count() + frame);

    Image d_l1, d_ssim;
    const double l1v = l1_with_grad(out.image, target, d_l1);
    const double ssimv = ssim_with_grad(out.image, target, d_ssim);
    const double lambda = config_.lambda_ssim;
    const double loss = (1.0 - lambda) * l1v + lambda * (1.0 - ssimv);

    if (cap) {
        cap->cam = cam;
        cap->frame = frame;
        cap->sched_iter = sched_iter;
        cap->camera = camera;
        cap->world = std::move(world);
        cap->local_deformed = std::move(local_deformed);
        cap->dcaches = std::move(dcaches);
        cap->pcaches = std::move(pcaches);
        cap->l1_term = l1v;
        cap->ssim_term = 1.0 - ssimv;
        cap->d_image = Image(out.image.height(), out.image.width());
        for (size_t i = 0; i < cap->d_image.size(); ++i)
            cap->d_image.data()[i] =
                (1.0 - lambda) * d_l1.data()[i] - lambda * d_ssim.data()[i];
    }
    if (out_image) *out_image = out.image;
    return loss;
}

namespace {

// Flat views over the structured gradient carriers; layouts match the
// parameter registry (vectors of fixed-size Eigen types are contiguous).
void copy_set_grads(const std::vector<Vec3>& d_mu, const std::vector<Vec3>& d_scale,
                    const std::vector<Vec4>& d_quat, const std::vector<double>& d_op,
                    const Eigen::MatrixXd& d_sh, const Eigen::MatrixXd& d_embed,
                    std::vector<std::vector<double>>& out, size_t base) {
    const int k = static_cast<int>(d_mu.size());
    out[base + 0].assign(d_mu[0].data(), d_mu[0].data() + 3 * k);
    out[base + 1].assign(d_scale[0].data(), d_scale[0].data() + 3 * k);
    out[base + 2].assign(d_quat[0].data(), d_quat[0].data() + 4 * k);
    out[base + 3].assign(d_op.data(), d_op.data() + k);
    out[base + 4].assign(d_sh.data(), d_sh.data() + d_sh.size());
    out[base + 5].assign(d_embed.data(), d_embed.data() + d_embed.size());
}

} // namespace

void Trainer::backward_into(ForwardCapture& cap,
                            std::vector<std::vector<double>>& grads) {
    grads.assign(registry_.size(), {});
    for (size_t i = 0; i < registry_.size(); ++i)
        grads[i].assign(registry_[i].size, 0.0);

    const RenderGrads wg = render_backward(cap.world, cap.camera, dataset_.background,
                                           cap.d_image);

    // registry layout: scene(6) | objects(6 each) | corrections | W | heads
    const size_t n_objects = object_local_.size();
    const size_t corr_base = 6 + 6 * n_objects;
    const size_t w_index = corr_base + corrections_.size();
    const size_t coarse_base = w_index + 1;
    const size_t n_coarse = deformer_.coarse.mlp.layers().size() * 2;

    const auto add_layer_grads = [&](const std::vector<MlpLayer>& dl, size_t base) {
        for (size_t l = 0; l < dl.size(); ++l) {
            Eigen::Map<Eigen::VectorXd>(grads[base + 2 * l].data(), dl[l].w.size()) +=
                Eigen::Map<const Eigen::VectorXd>(dl[l].w.data(), dl[l].w.size());
            Eigen::Map<Eigen::VectorXd>(grads[base + 2 * l + 1].data(),
                                        dl[l].b.size()) +=
                Eigen::Map<const Eigen::VectorXd>(dl[l].b.data(), dl[l].b.size());
        }
    };
    const auto add_deformer_grads = [&](const DeformGrads& dg) {
        Eigen::Map<Eigen::VectorXd>(grads[w_index].data(), dg.d_temporal_w.size()) +=
            Eigen::Map<const Eigen::VectorXd>(dg.d_temporal_w.data(),
                                              dg.d_temporal_w.size());
        add_layer_grads(dg.d_coarse, coarse_base);
        add_layer_grads(dg.d_fine, coarse_base + n_coarse);
    };

    if (config_.mode == "self") {
        const DeformGrads dg = deform_backward(scene_, deformer_, cap.dcaches[0], wg);
        copy_set_grads(dg.d_mu, dg.d_scale, dg.d_quat, dg.d_opacity, dg.d_sh,
                       dg.d_embed, grads, 0);
        add_deformer_grads(dg);
        return;
    }

    // supervised: split world gradients into statics + per-object slices
    const int k_static = scene_.count();
    copy_set_grads(
        std::vector<Vec3>(wg.d_mu.begin(), wg.d_mu.begin() + k_static),
        std::vector<Vec3>(wg.d_scale.begin(), wg.d_scale.begin() + k_static),
        std::vector<Vec4>(wg.d_quat.begin(), wg.d_quat.begin() + k_static),
        std::vector<double>(wg.d_opacity.begin(), wg.d_opacity.begin() + k_static),
        wg.d_sh.topRows(k_static), scene_.embed * 0.0, grads, 0);

    int offset = k_static;
    for (size_t o = 0; o < n_objects; ++o) {
        const int k = object_local_[o].count();
        RenderGrads up = RenderGrads::zeros(cap.local_deformed[o]);
        for (int i = 0; i < k; ++i) {
            up.d_mu[i] = wg.d_mu[offset + i];
            up.d_scale[i] = wg.d_scale[offset + i];
            up.d_quat[i] = wg.d_quat[offset + i];
            up.d_opacity[i] = wg.d_opacity[offset + i];
        }
        up.d_sh = wg.d_sh.middleRows(offset, k);

        // placement adjoint rewrites the mu/quat gradients into local frame
        // and yields the pose-correction gradients
        const PlacementGrads pg =
            place_object_backward(cap.local_deformed[o], TrackedPose{}, cap.pcaches[o],
                                  up);
        up.d_mu = pg.d_mu;
        up.d_quat = pg.d_quat;

        const DeformGrads dg =
            deform_backward(object_local_[o], deformer_, cap.dcaches[o], up);
        copy_set_grads(dg.d_mu, dg.d_scale, dg.d_quat, dg.d_opacity, dg.d_sh,
                       dg.d_embed, grads, 6 + 6 * o);
        add_deformer_grads(dg);

        // corrections tensor layout: [omega_c, omega_f, dt_c, dt_f] per frame
        auto& cg = grads[corr_base + o];
        const size_t fbase = static_cast<size_t>(cap.frame) * 12;
        for (int c = 0; c < 3; ++c) {
            cg[fbase + c] += pg.d_omega[c];
            cg[fbase + 3 + c] += pg.d_omega[c];
            cg[fbase + 6 + c] += pg.d_translation[c];
            cg[fbase + 9 + c] += pg.d_translation[c];
        }
        offset += k;
    }
}

IterationStats Trainer::step() {
    if (iteration_ >= config_.iterations)
        throw ConfigError("step: training budget exhausted");
    int cam = 0, frame = 0;
    sample(iteration_, cam, frame);

    ForwardCapture cap;
    const double loss = forward(cam, frame, &cap, nullptr);
    if (!std::isfinite(loss))
        throw NumericError("fit: non-finite loss at iteration " +
                           std::to_string(iteration_));

    std::vector<std::vector<double>> grads;
    backward_into(cap, grads);

    AdamParams hp;
    for (size_t i = 0; i < registry_.size(); ++i) {
        hp.lr = registry_[i].lr;
        adam_step(registry_[i].state, hp, registry_[i].data, grads[i].data(),
                  registry_[i].size, registry_[i].name);
    }
    project_parameters();

    IterationStats stats;
    stats.iter = iteration_;
    stats.loss = loss;
    stats.l1_term = cap.l1_term;
    stats.ssim_term = cap.ssim_term;
    ++iteration_;
    return stats;
}

void Trainer::project_parameters() {
    const auto project_set = [](GaussianSet& g) {
        for (int i = 0; i < g.count(); ++i) {
            g.quat[i] /= g.quat[i].norm();
            g.opacity[i] = std::clamp(g.opacity[i], 0.0, 1.0);
            g.scale[i] = g.scale[i].cwiseMax(kMinScale);
        }
    };
    project_set(scene_);
    for (auto& obj : object_local_) project_set(obj);
}

void Trainer::fit(std::ostream* loss_log) {
    char line[160];
    while (iteration_ < config_.iterations) {
        const IterationStats s = step();
        if (loss_log) {
            std::snprintf(line, sizeof(line), "%ld,%.12e,%.12e,%.12e\n", s.iter, s.loss,
                          s.l1_term, s.ssim_term);
            *loss_log << line;
        }
    }
}

double Trainer::loss_at(int cam, int frame) {
    return forward(cam, frame, nullptr, nullptr);
}

std::pair<double, std::vector<std::vector<double>>>
Trainer::loss_and_gradients(int cam, int frame) {
    ForwardCapture cap;
    const double loss = forward(cam, frame, &cap, nullptr);
    std::vector<std::vector<double>> grads;
    backward_into(cap, grads);
    return {loss, std::move(grads)};
}

Image Trainer::render_frame(int cam, int frame) {
    const double t = dataset_.timestamps.at(frame);
    const long sched_iter = std::min(iteration_, config_.iterations);
    const GaussianSet world = assemble_world(t, frame, sched_iter, nullptr, nullptr);
    return render(world, dataset_.rigs.at(cam).camera(frame), dataset_.background)
        .image;
}

Image Trainer::render_time(int cam, double t) {
    if (!(t >= 0.0 && t <= 1.0)) throw DomainError("render_time: t outside [0,1]");
    const int nearest =
        static_cast<int>(std::lround(t * (dataset_.frame_count() - 1)));
    const long sched_iter = std::min(iteration_, config_.iterations);
    const GaussianSet world = assemble_world(t, nearest, sched_iter, nullptr, nullptr);
    return render(world, dataset_.rigs.at(cam).camera(nearest), dataset_.background)
        .image;
}

} // namespace splat4d
