#pragma once

#include <unordered_map>

#include "sgsim/config.hpp"
#include "sgsim/mlp.hpp"
#include "sgsim/normalizer.hpp"
#include "sgsim/rng.hpp"
#include "sgsim/tensor.hpp"

namespace sgsim {

enum class ParamKind { Weight, Bias, LnGamma, LnBeta, NormStat };

struct ParamInfo {
    std::string name;
    std::vector<int> shape;
    ParamKind kind;
};

/// Canonical list of model weight tensors for a config: names, shapes and
/// init kinds, in a fixed order. Everything that touches parameters by name
/// (init, checkpoints, transfer) goes through this.
std::vector<ParamInfo> enumerate_params(const ModelConfig& c);

/// Normalizer statistics tensors (count/sum/sumsq per feature family) as they
/// appear in checkpoints, after the weights.
std::vector<ParamInfo> enumerate_norm_stats(const ModelConfig& c);

uint64_t name_hash(const std::string& s);

/// Name-ordered tensor dictionary.
template <typename S>
struct ParamStoreT {
    std::vector<std::string> names;
    std::vector<TensorT<S>> tensors;
    std::unordered_map<std::string, int> index;

    void add(const std::string& name, TensorT<S> t) {
        if (index.count(name)) throw std::invalid_argument("param store: duplicate name " + name);
        index.emplace(name, (int)names.size());
        names.push_back(name);
        tensors.push_back(std::move(t));
    }
    bool has(const std::string& name) const { return index.count(name) != 0; }
    TensorT<S>& at(const std::string& name) {
        auto it = index.find(name);
        if (it == index.end()) throw std::out_of_range("param store: missing " + name);
        return tensors[it->second];
    }
    const TensorT<S>& at(const std::string& name) const {
        auto it = index.find(name);
        if (it == index.end()) throw std::out_of_range("param store: missing " + name);
        return tensors[it->second];
    }
    size_t size() const { return tensors.size(); }
};

using ParamStore = ParamStoreT<float>;

/// Deterministic per-tensor init keyed by tensor name, so a given (seed,
/// name) pair always produces the same values no matter which subset of
/// tensors gets initialized.
template <typename S>
void init_param_tensor(TensorT<S>& t, const ParamInfo& info, uint64_t seed) {
    t = TensorT<S>(info.shape);
    switch (info.kind) {
        case ParamKind::Weight: {
            Rng rng(mix_seed(seed, name_hash(info.name)));
            glorot_fill(t, rng);
            break;
        }
        case ParamKind::LnGamma:
            t.fill(S(1));
            break;
        default:
            break;  // biases, ln offsets and norm stats start at zero
    }
}

template <typename S>
ParamStoreT<S> init_params(const ModelConfig& c, uint64_t seed) {
    ParamStoreT<S> store;
    for (const auto& info : enumerate_params(c)) {
        TensorT<S> t;
        init_param_tensor(t, info, seed);
        store.add(info.name, std::move(t));
    }
    return store;
}

template <typename To, typename From>
ParamStoreT<To> store_cast(const ParamStoreT<From>& in) {
    ParamStoreT<To> out;
    for (size_t i = 0; i < in.size(); ++i) out.add(in.names[i], in.tensors[i].template cast<To>());
    return out;
}

/// Input/output feature normalizers for one model.
struct Normalizers {
    RunningNormalizer in_xm, in_xe, in_mm, in_ee, in_me, in_em, out_m, out_e;

    static Normalizers make(const ModelConfig& c) {
        Normalizers n;
        int ew = 2 * c.dim + 2;
        n.in_xm = RunningNormalizer(1 + c.dim);
        n.in_xe = RunningNormalizer(2 + c.dim);
        n.in_mm = RunningNormalizer(ew);
        n.in_ee = RunningNormalizer(ew);
        n.in_me = RunningNormalizer(ew);
        n.in_em = RunningNormalizer(ew);
        n.out_m = RunningNormalizer(c.dim);
        n.out_e = RunningNormalizer(c.dim);
        return n;
    }

    std::vector<std::pair<std::string, RunningNormalizer*>> entries() {
        return {{"norm.in.xm", &in_xm}, {"norm.in.xe", &in_xe}, {"norm.in.mm", &in_mm},
                {"norm.in.ee", &in_ee}, {"norm.in.me", &in_me}, {"norm.in.em", &in_em},
                {"norm.out.m", &out_m}, {"norm.out.e", &out_e}};
    }
    std::vector<std::pair<std::string, const RunningNormalizer*>> entries() const {
        auto mut = const_cast<Normalizers*>(this)->entries();
        return {mut.begin(), mut.end()};
    }
};

/// Lazily binds store tensors as tape leaves, one per name, and hands
/// gradients back keyed by store index.
template <typename S>
struct BinderT {
    TapeT<S>& tape;
    const ParamStoreT<S>& store;
    bool needs_grad = true;
    std::unordered_map<std::string, int> vars;

    BinderT(TapeT<S>& t, const ParamStoreT<S>& s, bool ng = true) : tape(t), store(s), needs_grad(ng) {}

    int var(const std::string& name) {
        auto it = vars.find(name);
        if (it != vars.end()) return it->second;
        int id = tape.leaf(store.at(name), needs_grad);
        vars.emplace(name, id);
        return id;
    }

    MlpVars mlp(const std::string& prefix, bool output_norm, bool residual = false) {
        MlpVars m;
        for (int l = 0; l < 3; ++l) {
            m.w.push_back(var(prefix + ".w" + std::to_string(l)));
            m.b.push_back(var(prefix + ".b" + std::to_string(l)));
        }
        if (output_norm) {
            m.ln_gamma = var(prefix + ".ln_g");
            m.ln_beta = var(prefix + ".ln_b");
        }
        m.output_norm = output_norm;
        m.residual = residual;
        return m;
    }

    /// Add this tape's parameter gradients into store-aligned accumulators.
    void accumulate_grads(std::vector<TensorT<S>>& acc) const {
        if (acc.size() != store.size()) {
            acc.clear();
            for (const auto& t : store.tensors) acc.emplace_back(t.shape);
        }
        for (const auto& [name, id] : vars) {
            const TensorT<S>& g = tape.grad(id);
            if (g.size() == 0) continue;  // backward not run through this leaf
            TensorT<S>& dst = acc[store.index.at(name)];
            for (size_t i = 0; i < g.size(); ++i) dst.data[i] += g.data[i];
        }
    }
};

}  // namespace sgsim
