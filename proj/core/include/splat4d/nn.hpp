#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "splat4d/errors.hpp"

namespace splat4d {

struct MlpLayer {
    Eigen::MatrixXd w; // out x in
    Eigen::VectorXd b; // out
};

/// Fixed-architecture MLP: affine layers with tanh on the hidden ones and a
/// linear output layer. Forward caches everything backward needs; the cache
/// is tied to a weight revision so reuse after an update is rejected.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<int> sizes);

    /// Xavier-uniform hidden layers. The output layer is zeroed when
    /// zero_init_last is set, so the net is exactly the zero map at start.
    void init_random(std::mt19937_64& rng, bool zero_init_last);

    int input_size() const { return sizes_.front(); }
    int output_size() const { return sizes_.back(); }
    const std::vector<int>& sizes() const { return sizes_; }

    struct Cache {
        Eigen::MatrixXd input;               // in x n
        std::vector<Eigen::MatrixXd> hidden; // tanh outputs per hidden layer
        std::uint64_t revision = 0;
    };

    /// Columns of x are samples. Returns out x n.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

    /// Exact reverse-mode pass. Accumulates parameter gradients into `grads`
    /// (same shapes as layers()) and returns d_input. Throws std::logic_error
    /// if the cache predates the last weight mutation.
    Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                             std::vector<MlpLayer>& grads) const;

    const std::vector<MlpLayer>& layers() const { return layers_; }
    /// Mutable access; invalidates outstanding caches.
    std::vector<MlpLayer>& mutable_layers() {
        ++revision_;
        return layers_;
    }

    std::vector<MlpLayer> zero_grads() const;
    std::uint64_t revision() const { return revision_; }

    int parameter_count() const;

private:
    std::vector<int> sizes_;
    std::vector<MlpLayer> layers_;
    std::uint64_t revision_ = 0;
};

struct AdamParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Per-tensor first/second moment accumulators.
struct AdamState {
    Eigen::ArrayXd m, v;
    std::int64_t step = 0;

    void init(Eigen::Index n) {
        m = Eigen::ArrayXd::Zero(n);
        v = Eigen::ArrayXd::Zero(n);
        step = 0;
    }
};

/// One adaptive-moment update with bias correction, in place.
/// Throws NumericError naming `tensor` when a gradient entry is non-finite.
void adam_step(AdamState& state, const AdamParams& hp, double* params,
               const double* grads, Eigen::Index n, const std::string& tensor);

} // namespace splat4d
