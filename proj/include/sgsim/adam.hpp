#pragma once

#include <cmath>

#include "sgsim/tensor.hpp"

namespace sgsim {

/// Adam over an indexed list of tensors. The caller keeps parameter order
/// fixed across steps; moment tensors are allocated on first use.
template <typename S>
struct AdamT {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long long t = 0;
    std::vector<TensorT<S>> m, v;

    void ensure(const std::vector<TensorT<S>>& params) {
        if (!m.empty()) {
            if (m.size() != params.size()) throw std::invalid_argument("adam: parameter list changed size");
            return;
        }
        for (const auto& p : params) {
            m.emplace_back(p.shape);
            v.emplace_back(p.shape);
        }
    }

    void step(std::vector<TensorT<S>>& params, const std::vector<TensorT<S>>& grads, double lr) {
        if (params.size() != grads.size()) throw std::invalid_argument("adam: grads/params size mismatch");
        ensure(params);
        ++t;
        double bc1 = 1.0 - std::pow(beta1, (double)t);
        double bc2 = 1.0 - std::pow(beta2, (double)t);
        for (size_t i = 0; i < params.size(); ++i) {
            if (!params[i].same_shape(grads[i]))
                throw std::invalid_argument("adam: grad shape mismatch at tensor " + std::to_string(i));
            S* p = params[i].data.data();
            const S* g = grads[i].data.data();
            S* mi = m[i].data.data();
            S* vi = v[i].data.data();
            for (size_t j = 0; j < params[i].size(); ++j) {
                mi[j] = (S)(beta1 * mi[j] + (1.0 - beta1) * g[j]);
                vi[j] = (S)(beta2 * vi[j] + (1.0 - beta2) * (double)g[j] * g[j]);
                double mhat = mi[j] / bc1;
                double vhat = vi[j] / bc2;
                p[j] = (S)(p[j] - lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
    }
};

using Adam = AdamT<float>;

}  // namespace sgsim
