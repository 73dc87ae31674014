#include "splat4d/eval.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>

#include "splat4d/metrics.hpp"

namespace splat4d {

using nlohmann::json;

namespace {

FrameMetrics frame_metrics(Trainer& trainer, int cam, int frame) {
    const Dataset& ds = trainer.dataset();
    const Image rendered = quantized(trainer.render_frame(cam, frame));
    const Image target = ds.load_frame(cam, frame);

    FrameMetrics fm;
    fm.cam = cam;
    fm.frame = frame;
    fm.psnr = psnr(rendered, target);
    fm.ssim = ssim(rendered, target);
    for (size_t o = 0; o < ds.objects.size(); ++o) {
        const Mask mask = ds.load_mask(cam, frame, static_cast<int>(o));
        try {
            fm.obj_psnr.push_back(masked_psnr(rendered, target, mask));
            fm.obj_ssim.push_back(masked_ssim(rendered, target, mask));
        } catch (const DomainError&) { // object not visible in this frame
            fm.obj_psnr.push_back(std::nullopt);
            fm.obj_ssim.push_back(std::nullopt);
        }
    }
    return fm;
}

SplitSummary summarize(const std::vector<FrameMetrics>& rows, size_t n_objects) {
    SplitSummary s;
    s.frames = static_cast<int>(rows.size());
    if (rows.empty()) return s;
    for (const auto& r : rows) {
        s.psnr += r.psnr;
        s.ssim += r.ssim;
    }
    s.psnr /= rows.size();
    s.ssim /= rows.size();
    for (size_t o = 0; o < n_objects; ++o) {
        double ps = 0, ss = 0;
        int n = 0;
        for (const auto& r : rows) {
            if (o < r.obj_psnr.size() && r.obj_psnr[o] && r.obj_ssim[o]) {
                ps += *r.obj_psnr[o];
                ss += *r.obj_ssim[o];
                ++n;
            }
        }
        if (n > 0) {
            s.obj_psnr.push_back(ps / n);
            s.obj_ssim.push_back(ss / n);
        } else {
            s.obj_psnr.push_back(std::nullopt);
            s.obj_ssim.push_back(std::nullopt);
        }
    }
    return s;
}

json metrics_row_json(const FrameMetrics& r) {
    json j;
    j["cam"] = r.cam;
    j["frame"] = r.frame;
    j["psnr"] = r.psnr;
    j["ssim"] = r.ssim;
    j["objects"] = json::array();
    for (size_t o = 0; o < r.obj_psnr.size(); ++o) {
        json e;
        e["id"] = static_cast<int>(o);
        if (r.obj_psnr[o]) e["psnr_masked"] = *r.obj_psnr[o];
        if (r.obj_ssim[o]) e["ssim_masked"] = *r.obj_ssim[o];
        j["objects"].push_back(e);
    }
    return j;
}

json summary_json(const SplitSummary& s) {
    json j;
    j["frames"] = s.frames;
    j["psnr"] = s.psnr;
    j["ssim"] = s.ssim;
    j["objects"] = json::array();
    for (size_t o = 0; o < s.obj_psnr.size(); ++o) {
        json e;
        e["id"] = static_cast<int>(o);
        if (s.obj_psnr[o]) e["psnr_masked"] = *s.obj_psnr[o];
        if (s.obj_ssim[o]) e["ssim_masked"] = *s.obj_ssim[o];
        j["objects"].push_back(e);
    }
    return j;
}

} // namespace

EvalReport evaluate(Trainer& trainer, const std::string& split) {
    const Dataset& ds = trainer.dataset();
    EvalReport report;
    for (int cam = 0; cam < ds.camera_count(); ++cam) {
        for (int f = 0; f < ds.frame_count(); ++f) {
            FrameMetrics fm = frame_metrics(trainer, cam, f);
            if (is_heldout_frame(f, split))
                report.heldout_rows.push_back(std::move(fm));
            else
                report.train_rows.push_back(std::move(fm));
        }
    }
    report.train_summary = summarize(report.train_rows, ds.objects.size());
    report.heldout_summary = summarize(report.heldout_rows, ds.objects.size());
    return report;
}

void write_eval_report(const EvalReport& report, const std::filesystem::path& path) {
    json j;
    j["reconstruction"] = {{"summary", summary_json(report.train_summary)},
                           {"frames", json::array()}};
    for (const auto& r : report.train_rows)
        j["reconstruction"]["frames"].push_back(metrics_row_json(r));
    j["novel_view"] = {{"summary", summary_json(report.heldout_summary)},
                       {"frames", json::array()}};
    for (const auto& r : report.heldout_rows)
        j["novel_view"]["frames"].push_back(metrics_row_json(r));
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write eval report: " + path.string());
    out << j.dump(2) << "\n";
}

const AblationRow& AblationResult::row(const std::string& label) const {
    for (const auto& r : rows)
        if (r.label == label) return r;
    throw ConfigError("no ablation row labelled '" + label + "'");
}

std::string AblationResult::table() const {
    const auto opt = [](const std::optional<double>& v, const char* fmt) {
        char buf[32];
        if (!v) return std::string("-");
        std::snprintf(buf, sizeof(buf), fmt, *v);
        return std::string(buf);
    };
    char line[160];
    std::string out;
    std::snprintf(line, sizeof(line), "%-26s %8s %8s %12s %12s\n", "Variant", "PSNR",
                  "SSIM", "PSNR(mask)", "SSIM(mask)");
    out += line;
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line), "%-26s %8.2f %8.4f %12s %12s\n",
                      r.label.c_str(), r.psnr, r.ssim,
                      opt(r.masked_psnr, "%.2f").c_str(),
                      opt(r.masked_ssim, "%.4f").c_str());
        out += line;
    }
    return out;
}

AblationResult run_ablation(const Dataset& dataset, const TrainConfig& base,
                            std::ostream* progress) {
    struct Variant {
        const char* label;
        DeformSwitches sw;
    };
    const std::vector<Variant> variants = {
        {"Full Model", {true, true, true, true}},
        {"w/o Gaussian Embedding", {false, true, true, true}},
        {"w/o Temporal Embedding", {true, false, true, true}},
        {"w/o Coarse Deformation", {true, true, false, true}},
        {"w/o Fine Deformation", {true, true, true, false}},
    };

    AblationResult result;
    // "masked" column tracks the fastest object (the vehicle-like cluster)
    double best_speed = -1.0;
    for (size_t o = 0; o < dataset.objects.size(); ++o)
        if (dataset.objects[o].speed > best_speed) {
            best_speed = dataset.objects[o].speed;
            result.fast_object = static_cast<int>(o);
        }

    for (const auto& v : variants) {
        TrainConfig cfg = base;
        cfg.switches = v.sw;
        if (progress) *progress << "[ablate] " << v.label << ": fitting "
                                << cfg.iterations << " iterations\n";
        Trainer trainer(dataset, cfg);
        double last_loss = 0.0;
        while (trainer.iteration() < cfg.iterations) last_loss = trainer.step().loss;
        const EvalReport report = evaluate(trainer, cfg.split);

        AblationRow row;
        row.label = v.label;
        row.switches = v.sw;
        row.psnr = report.train_summary.psnr;
        row.ssim = report.train_summary.ssim;
        row.final_loss = last_loss;
        if (result.fast_object >= 0 &&
            result.fast_object < static_cast<int>(report.train_summary.obj_psnr.size())) {
            row.masked_psnr = report.train_summary.obj_psnr[result.fast_object];
            row.masked_ssim = report.train_summary.obj_ssim[result.fast_object];
        }
        result.rows.push_back(std::move(row));
        if (progress)
            *progress << "[ablate] " << v.label << ": train PSNR "
                      << result.rows.back().psnr << "\n";
    }
    return result;
}

void write_ablation_report(const AblationResult& result,
                           const std::filesystem::path& path) {
    json j;
    j["fast_object"] = result.fast_object;
    j["rows"] = json::array();
    for (const auto& r : result.rows) {
        json e;
        e["label"] = r.label;
        e["psnr"] = r.psnr;
        e["ssim"] = r.ssim;
        if (r.masked_psnr) e["psnr_masked"] = *r.masked_psnr;
        if (r.masked_ssim) e["ssim_masked"] = *r.masked_ssim;
        e["final_loss"] = r.final_loss;
        e["switches"] = {{"gauss_embed", r.switches.use_gauss_embed},
                         {"temporal", r.switches.use_temporal},
                         {"coarse", r.switches.use_coarse},
                         {"fine", r.switches.use_fine}};
        j["rows"].push_back(e);
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write ablation report: " + path.string());
    out << j.dump(2) << "\n";
}

} // namespace splat4d
