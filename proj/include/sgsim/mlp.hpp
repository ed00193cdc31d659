#pragma once

#include "sgsim/rng.hpp"
#include "sgsim/tape.hpp"
#include "sgsim/tensor.hpp"

namespace sgsim {

/// Tape-side handle to one MLP: var ids of its parameters plus behavior flags.
struct MlpVars {
    std::vector<int> w, b;
    int ln_gamma = -1, ln_beta = -1;
    bool residual = false;
    bool output_norm = false;
};

/// Owned-parameter form, used for standalone construction and shape checks.
template <typename S>
struct MlpParamsT {
    std::vector<int> sizes;  // in, hidden..., out
    std::vector<TensorT<S>> weights;
    std::vector<TensorT<S>> biases;
    TensorT<S> ln_gamma, ln_beta;
    bool residual = false;
    bool output_norm = false;

    void validate() const {
        if (sizes.size() < 2) throw std::invalid_argument("mlp: needs at least input and output size");
        for (int s : sizes)
            if (s < 1) throw std::invalid_argument("mlp: layer sizes must be positive");
        if (residual && sizes.front() != sizes.back())
            throw std::invalid_argument("mlp: residual requires matching input/output width");
        if (weights.size() != sizes.size() - 1 || biases.size() != sizes.size() - 1)
            throw std::invalid_argument("mlp: layer count mismatch");
        for (size_t l = 0; l + 1 < sizes.size(); ++l) {
            if (weights[l].shape != std::vector<int>{sizes[l], sizes[l + 1]})
                throw std::invalid_argument("mlp: weight " + std::to_string(l) + " has shape " +
                                            shape_str(weights[l].shape));
            if (biases[l].shape != std::vector<int>{sizes[l + 1]})
                throw std::invalid_argument("mlp: bias " + std::to_string(l) + " has shape " +
                                            shape_str(biases[l].shape));
        }
        if (output_norm) {
            if (ln_gamma.shape != std::vector<int>{sizes.back()} || ln_beta.shape != std::vector<int>{sizes.back()})
                throw std::invalid_argument("mlp: layer-norm params must match output width");
        }
    }
};

template <typename S>
void glorot_fill(TensorT<S>& w, Rng& rng) {
    if (w.shape.size() != 2) throw std::invalid_argument("glorot_fill: expected 2-d weight");
    double limit = std::sqrt(6.0 / (w.shape[0] + w.shape[1]));
    for (auto& v : w.data) v = static_cast<S>(rng.uniform(-limit, limit));
}

template <typename S>
void mlp_init(MlpParamsT<S>& p, Rng& rng) {
    p.weights.clear();
    p.biases.clear();
    for (size_t l = 0; l + 1 < p.sizes.size(); ++l) {
        TensorT<S> w({p.sizes[l], p.sizes[l + 1]});
        glorot_fill(w, rng);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(std::vector<int>{p.sizes[l + 1]});
    }
    if (p.output_norm) {
        p.ln_gamma = TensorT<S>({p.sizes.back()});
        p.ln_gamma.fill(S(1));
        p.ln_beta = TensorT<S>({p.sizes.back()});
    }
    p.validate();
}

template <typename S>
MlpVars mlp_bind(TapeT<S>& tape, const MlpParamsT<S>& p, bool needs_grad = true) {
    MlpVars v;
    for (size_t l = 0; l < p.weights.size(); ++l) {
        v.w.push_back(tape.leaf(p.weights[l], needs_grad));
        v.b.push_back(tape.leaf(p.biases[l], needs_grad));
    }
    if (p.output_norm) {
        v.ln_gamma = tape.leaf(p.ln_gamma, needs_grad);
        v.ln_beta = tape.leaf(p.ln_beta, needs_grad);
    }
    v.residual = p.residual;
    v.output_norm = p.output_norm;
    return v;
}

/// ReLU between hidden layers, none after the last; optional layer norm on the
/// output, then the residual add, so a zero-weight residual MLP is identity.
template <typename S>
int mlp_apply(TapeT<S>& tape, const MlpVars& m, int x) {
    int h = x;
    for (size_t l = 0; l < m.w.size(); ++l) {
        h = tape.add_bias(tape.matmul(h, m.w[l]), m.b[l]);
        if (l + 1 < m.w.size()) h = tape.relu(h);
    }
    if (m.output_norm) h = tape.layer_norm(h, m.ln_gamma, m.ln_beta);
    if (m.residual) h = tape.add(h, x);
    return h;
}

}  // namespace sgsim
