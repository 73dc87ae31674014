#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "splat4d/dataset.hpp"
#include "splat4d/deform.hpp"
#include "splat4d/gradcheck.hpp"
#include "splat4d/nn.hpp"
#include "splat4d/pose.hpp"

namespace splat4d {

struct TrainConfig {
    long iterations = 5000;
    double lambda_ssim = 0.2; // loss = (1-lambda) L1 + lambda (1 - SSIM)

    // learning rates per parameter group
    double lr_position = 1e-3;
    double lr_scale = 5e-3;
    double lr_quat = 1e-3;
    double lr_opacity = 2.5e-2;
    double lr_sh = 2.5e-3;
    double lr_embed = 1e-3;    // per-Gaussian embeddings z
    double lr_temporal = 1e-3; // embedding matrix W
    double lr_deform = 1.6e-4; // head MLP weights
    double lr_pose = 5e-3;     // pose corrections (supervised mode)

    // encoding and schedule
    int pos_bands = 4;
    int temporal_dim = 16;
    int gauss_dim = 16;
    int n_min = 4, n_max = 16;
    int head_width = 64, head_depth = 2;
    double fine_gain = 0.1;
    double position_scale = 0.125; // contracts scene units before encoding

    // model initialization (positions from the scripted geometry + noise,
    // gray colors, low opacity)
    double init_position_noise = 0.03;
    double init_opacity = 0.1;
    double init_scale = 0.12;
    double init_embed_sigma = 0.1;

    std::uint64_t seed = 1;
    std::string mode = "self";  // self | supervised
    std::string split = "10th"; // 10th | 4th — held-out novel-view frames
    bool strict_sequential = false;
    DeformSwitches switches;

    void validate() const;
};

/// Frames held out for novel-view evaluation (every 10th or every 4th).
bool is_heldout_frame(int frame, const std::string& split);
std::vector<int> train_frames(int total, const std::string& split);
std::vector<int> heldout_frames(int total, const std::string& split);

struct IterationStats {
    long iter = 0;
    double loss = 0, l1_term = 0, ssim_term = 0;
};

/// Owns the model (canonical Gaussians, deformer, pose corrections), the
/// optimizer states, and the sampling stream. One Trainer per fit run.
class Trainer {
public:
    Trainer(Dataset dataset, TrainConfig config);

    /// One optimization step; the returned stats describe the loss at the
    /// pre-update parameters.
    IterationStats step();

    /// Runs the remaining iterations, writing one "iter,loss,l1,ssim_term"
    /// line per iteration when loss_log is given.
    void fit(std::ostream* loss_log = nullptr);

    /// Forward loss at the current parameters for a fixed (camera, frame).
    double loss_at(int cam, int frame);

    /// Loss plus analytic gradients for every registered tensor, aligned
    /// with parameter_blocks(). No optimizer update.
    std::pair<double, std::vector<std::vector<double>>> loss_and_gradients(int cam,
                                                                           int frame);

    /// Live views into every learnable tensor (for the gradient oracle).
    std::vector<ParamBlock> parameter_blocks();

    /// The model's image for a dataset frame (supervised poses included).
    Image render_frame(int cam, int frame);

    /// Render at an arbitrary t in [0,1]; supervised object poses use the
    /// nearest frame.
    Image render_time(int cam, double t);

    const TrainConfig& config() const { return config_; }
    const Dataset& dataset() const { return dataset_; }
    long iteration() const { return iteration_; }

    // checkpoint plumbing
    friend void save_checkpoint(const Trainer& t, const std::filesystem::path& path);
    friend std::unique_ptr<Trainer> load_checkpoint(const std::filesystem::path& path,
                                                    const Dataset& dataset);

private:
    struct Tensor {
        std::string name;
        double* data = nullptr;
        Eigen::Index size = 0;
        double lr = 0.0;
        AdamState state;
    };

    struct ForwardCapture; // per-iteration intermediate state

    void init_model();
    void build_registry();
    void sample(long iter, int& cam, int& frame);
    double forward(int cam, int frame, ForwardCapture* cap, Image* out_image);
    void backward_into(ForwardCapture& cap, std::vector<std::vector<double>>& grads);
    void project_parameters();
    GaussianSet assemble_world(double t, int pose_frame, long sched_iter,
                               std::vector<DeformCache>* caches,
                               std::vector<PlacementCache>* pcaches);

    Dataset dataset_;
    TrainConfig config_;
    GaussianSet scene_;                      // canonical (self) / statics (supervised)
    std::vector<GaussianSet> object_local_;  // supervised object clusters
    DualScaleDeformer deformer_;
    std::vector<std::vector<PoseCorrection>> corrections_; // [object][frame]
    std::vector<Tensor> registry_;
    std::vector<Image> frames_;  // preloaded targets, index cam * F + frame
    long iteration_ = 0;
    std::mt19937_64 sampler_;
};

void save_checkpoint(const Trainer& t, const std::filesystem::path& path);

/// Rebuilds a Trainer from a checkpoint; the dataset must match the one the
/// checkpoint was trained on (path recorded in the config echo).
std::unique_ptr<Trainer> load_checkpoint(const std::filesystem::path& path,
                                         const Dataset& dataset);

/// Reconstructs the generator configuration recorded in a dataset manifest.
ScenarioConfig scenario_from_dataset(const Dataset& ds);

} // namespace splat4d
