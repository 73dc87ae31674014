#include "splat4d/nn.hpp"

#include <cmath>

namespace splat4d {

Mlp::Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.size() < 2) throw ShapeError("Mlp: need at least input and output sizes");
    for (int s : sizes_)
        if (s <= 0) throw ShapeError("Mlp: layer sizes must be positive");
    layers_.resize(sizes_.size() - 1);
    for (size_t i = 0; i + 1 < sizes_.size(); ++i) {
        layers_[i].w = Eigen::MatrixXd::Zero(sizes_[i + 1], sizes_[i]);
        layers_[i].b = Eigen::VectorXd::Zero(sizes_[i + 1]);
    }
}

void Mlp::init_random(std::mt19937_64& rng, bool zero_init_last) {
    for (size_t i = 0; i < layers_.size(); ++i) {
        const bool last = (i + 1 == layers_.size());
        if (last && zero_init_last) {
            layers_[i].w.setZero();
            layers_[i].b.setZero();
            continue;
        }
        const double a = std::sqrt(6.0 / (sizes_[i] + sizes_[i + 1]));
        std::uniform_real_distribution<double> dist(-a, a);
        for (Eigen::Index r = 0; r < layers_[i].w.rows(); ++r)
            for (Eigen::Index c = 0; c < layers_[i].w.cols(); ++c)
                layers_[i].w(r, c) = dist(rng);
        layers_[i].b.setZero();
    }
    ++revision_;
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
    if (x.rows() != input_size())
        throw ShapeError("Mlp::forward: input has " + std::to_string(x.rows()) +
                         " rows, expected " + std::to_string(input_size()));
    if (cache) {
        cache->input = x;
        cache->hidden.clear();
        cache->revision = revision_;
    }
    Eigen::MatrixXd h = x;
    for (size_t i = 0; i < layers_.size(); ++i) {
        Eigen::MatrixXd pre = layers_[i].w * h;
        pre.colwise() += layers_[i].b;
        if (i + 1 == layers_.size()) {
            h = std::move(pre); // linear output
        } else {
            h = pre.array().tanh().matrix();
            if (cache) cache->hidden.push_back(h);
        }
    }
    return h;
}

Eigen::MatrixXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_out,
                              std::vector<MlpLayer>& grads) const {
    if (cache.revision != revision_)
        throw std::logic_error("Mlp::backward: cache is stale (weights changed "
                               "since the matching forward)");
    if (d_out.rows() != output_size() || d_out.cols() != cache.input.cols())
        throw ShapeError("Mlp::backward: d_out shape mismatch");
    if (grads.size() != layers_.size())
        throw ShapeError("Mlp::backward: gradient buffer layout mismatch");

    Eigen::MatrixXd g = d_out;
    for (int i = static_cast<int>(layers_.size()) - 1; i >= 0; --i) {
        if (i + 1 < static_cast<int>(layers_.size())) {
            // tanh'(pre) = 1 - h^2, with h the cached activation
            g.array() *= 1.0 - cache.hidden[i].array().square();
        }
        const Eigen::MatrixXd& below =
            (i == 0) ? cache.input : cache.hidden[i - 1];
        grads[i].w.noalias() += g * below.transpose();
        grads[i].b += g.rowwise().sum();
        if (i > 0) g = layers_[i].w.transpose() * g;
    }
    return layers_[0].w.transpose() * g;
}

std::vector<MlpLayer> Mlp::zero_grads() const {
    std::vector<MlpLayer> g(layers_.size());
    for (size_t i = 0; i < layers_.size(); ++i) {
        g[i].w = Eigen::MatrixXd::Zero(layers_[i].w.rows(), layers_[i].w.cols());
        g[i].b = Eigen::VectorXd::Zero(layers_[i].b.size());
    }
    return g;
}

int Mlp::parameter_count() const {
    int n = 0;
    for (const auto& l : layers_) n += static_cast<int>(l.w.size() + l.b.size());
    return n;
}

void adam_step(AdamState& state, const AdamParams& hp, double* params,
               const double* grads, Eigen::Index n, const std::string& tensor) {
    if (state.m.size() != n) state.init(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (!std::isfinite(grads[i]))
            throw NumericError("adam_step: non-finite gradient in tensor '" + tensor +
                               "' at index " + std::to_string(i));
    ++state.step;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    for (Eigen::Index i = 0; i < n; ++i) {
        state.m[i] = hp.beta1 * state.m[i] + (1.0 - hp.beta1) * grads[i];
        state.v[i] = hp.beta2 * state.v[i] + (1.0 - hp.beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
}

} // namespace splat4d
