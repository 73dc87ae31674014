#pragma once

#include <optional>
#include <string>
#include <vector>

#include "splat4d/train.hpp"

namespace splat4d {

struct FrameMetrics {
    int cam = 0, frame = 0;
    double psnr = 0, ssim = 0;
    // one entry per tracked object; empty optional when the mask is empty
    std::vector<std::optional<double>> obj_psnr, obj_ssim;
};

struct SplitSummary {
    int frames = 0;
    double psnr = 0, ssim = 0; // means over (cam, frame)
    std::vector<std::optional<double>> obj_psnr, obj_ssim;
};

/// Reconstruction metrics on training frames, novel-view metrics on the
/// held-out split. Rendered images are quantized to the dataset's 8-bit
/// storage before comparison.
struct EvalReport {
    std::vector<FrameMetrics> train_rows, heldout_rows;
    SplitSummary train_summary, heldout_summary;
};

EvalReport evaluate(Trainer& trainer, const std::string& split);

void write_eval_report(const EvalReport& report,
                       const std::filesystem::path& path);

/// One fitted variant of the ablation suite.
struct AblationRow {
    std::string label;
    DeformSwitches switches;
    double psnr = 0, ssim = 0; // train-view full image
    std::optional<double> masked_psnr, masked_ssim; // fastest object
    double final_loss = 0;
};

struct AblationResult {
    std::vector<AblationRow> rows;
    int fast_object = -1;

    const AblationRow& row(const std::string& label) const;
    std::string table() const; // fixed-width text table
};

/// Runs the five standard variants (full model and the four single-component
/// removals) with identical seeds and budgets.
AblationResult run_ablation(const Dataset& dataset, const TrainConfig& base,
                            std::ostream* progress = nullptr);

void write_ablation_report(const AblationResult& result,
                           const std::filesystem::path& path);

} // namespace splat4d
