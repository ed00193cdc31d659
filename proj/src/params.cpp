#include "sgsim/params.hpp"

namespace sgsim {

namespace {

void emit_mlp(std::vector<ParamInfo>& out, const std::string& prefix, const std::vector<int>& sizes,
              bool output_norm) {
    for (size_t l = 0; l + 1 < sizes.size(); ++l) {
        out.push_back({prefix + ".w" + std::to_string(l), {sizes[l], sizes[l + 1]}, ParamKind::Weight});
        out.push_back({prefix + ".b" + std::to_string(l), {sizes[l + 1]}, ParamKind::Bias});
    }
    if (output_norm) {
        out.push_back({prefix + ".ln_g", {sizes.back()}, ParamKind::LnGamma});
        out.push_back({prefix + ".ln_b", {sizes.back()}, ParamKind::LnBeta});
    }
}

void emit_gnb(std::vector<ParamInfo>& out, const std::string& prefix, int latent) {
    emit_mlp(out, prefix + ".edge_mlp", {3 * latent, latent, latent, latent}, true);
    emit_mlp(out, prefix + ".node_mlp", {2 * latent, latent, latent, latent}, true);
}

}  // namespace

std::vector<ParamInfo> enumerate_params(const ModelConfig& c) {
    c.validate();
    std::vector<ParamInfo> out;
    int L = c.latent;
    int ew = 2 * c.dim + 2;
    emit_mlp(out, "enc.lift.xm", {1 + c.dim, L, L, L}, true);
    emit_mlp(out, "enc.lift.xe", {2 + c.dim, L, L, L}, true);
    for (const char* f : {"mm", "ee", "me", "em"})
        emit_mlp(out, std::string("enc.lift.") + f, {ew, L, L, L}, true);
    for (const char* f : {"mm", "ee", "me"})
        for (int i = 0; i < c.m_enc; ++i)
            emit_gnb(out, std::string("enc.proc.") + f + ".gnb" + std::to_string(i), L);
    if (c.baseline()) {
        for (int i = 0; i < c.m_proc; ++i) emit_gnb(out, "gunet.flat.gnb" + std::to_string(i), L);
    } else {
        for (int s = 0; s < c.num_stages(); ++s) {
            for (int i = 0; i < c.m_gu; ++i)
                emit_gnb(out, "gunet.stage" + std::to_string(s) + ".prE.gnb" + std::to_string(i), L);
            for (int i = 0; i < c.m_gu; ++i)
                emit_gnb(out, "gunet.stage" + std::to_string(s) + ".prD.gnb" + std::to_string(i), L);
        }
        for (int i = 0; i < c.m_gu; ++i) emit_gnb(out, "gunet.bottom.gnb" + std::to_string(i), L);
    }
    emit_gnb(out, "dec.interp", L);
    emit_mlp(out, "dec.out_e", {L, L, L, c.dim}, false);
    emit_mlp(out, "dec.out_m", {L, L, L, c.dim}, false);
    return out;
}

std::vector<ParamInfo> enumerate_norm_stats(const ModelConfig& c) {
    std::vector<ParamInfo> out;
    int ew = 2 * c.dim + 2;
    auto emit = [&](const std::string& name, int w) {
        out.push_back({name + ".count", {1}, ParamKind::NormStat});
        out.push_back({name + ".sum", {w}, ParamKind::NormStat});
        out.push_back({name + ".sumsq", {w}, ParamKind::NormStat});
    };
    emit("norm.in.xm", 1 + c.dim);
    emit("norm.in.xe", 2 + c.dim);
    emit("norm.in.mm", ew);
    emit("norm.in.ee", ew);
    emit("norm.in.me", ew);
    emit("norm.in.em", ew);
    emit("norm.out.m", c.dim);
    emit("norm.out.e", c.dim);
    return out;
}

uint64_t name_hash(const std::string& s) {
    uint64_t h = 14695981039346656037ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace sgsim
