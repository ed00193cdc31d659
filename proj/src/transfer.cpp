#include "sgsim/transfer.hpp"

#include <algorithm>

namespace sgsim {

using ordered_json = nlohmann::ordered_json;

MapStrategy strategy_from_string(const std::string& s) {
    if (s == "uniform") return MapStrategy::Uniform;
    if (s == "first-n") return MapStrategy::FirstN;
    throw std::invalid_argument("unknown mapping strategy '" + s + "' (expected uniform or first-n)");
}

std::string strategy_name(MapStrategy s) {
    return s == MapStrategy::Uniform ? "uniform" : "first-n";
}

std::vector<BlockProvenance> map_blocks(int n_src, int n_tgt, MapStrategy strategy) {
    if (n_src < 0 || n_tgt < 0) throw std::invalid_argument("map_blocks: negative block count");
    std::vector<BlockProvenance> out(n_tgt);
    if (n_src == 0) return out;  // nothing to transfer, everything fresh
    using Kind = BlockProvenance::Kind;
    if (strategy == MapStrategy::FirstN) {
        for (int i = 0; i < std::min(n_src, n_tgt); ++i) out[i] = {Kind::Copied, {i}};
        return out;
    }
    if (n_src == n_tgt) {
        for (int i = 0; i < n_tgt; ++i) out[i] = {Kind::Copied, {i}};
    } else if (n_src < n_tgt) {
        int up = (n_tgt + n_src - 1) / n_src;
        for (int i = 0; i < n_tgt; ++i) out[i] = {Kind::Copied, {i / up}};
    } else {
        int down = n_src / n_tgt;
        int rem = n_src % n_tgt;
        for (int i = 0; i < n_tgt; ++i) {
            int start = i < rem ? (down + 1) * i : down * i + rem;
            int len = i < rem ? down + 1 : down;
            out[i].kind = Kind::Averaged;
            for (int k = 0; k < len; ++k) out[i].sources.push_back(start + k);
        }
    }
    return out;
}

namespace {

const std::vector<std::string>& gnb_suffixes() {
    static const std::vector<std::string> s = [] {
        std::vector<std::string> v;
        for (const char* mlp : {"edge_mlp", "node_mlp"})
            for (const char* t : {"w0", "b0", "w1", "b1", "w2", "b2", "ln_g", "ln_b"})
                v.push_back(std::string(mlp) + "." + t);
        return v;
    }();
    return s;
}

Tensor mean_tensors(const std::vector<const Tensor*>& ts) {
    Tensor out(ts.at(0)->shape);
    for (const Tensor* t : ts) {
        if (t->shape != out.shape) throw std::invalid_argument("transplant: averaging mismatched shapes");
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += t->data[i];
    }
    float inv = 1.0f / (float)ts.size();
    for (auto& v : out.data) v *= inv;
    return out;
}

struct Assembler {
    const ParamStore& src;
    ParamStore params;
    ordered_json report_tensors = ordered_json::object();
    std::vector<std::string> anchors;

    void fresh(const ParamInfo& info, uint64_t seed) {
        Tensor t;
        init_param_tensor(t, info, seed);
        params.add(info.name, std::move(t));
        report_tensors[info.name] = {{"kind", "fresh"}, {"sources", ordered_json::array()}};
    }

    void copied(const ParamInfo& info, const std::string& src_name) {
        params.add(info.name, src.at(src_name));
        report_tensors[info.name] = {{"kind", "copied"}, {"sources", {src_name}}};
        anchors.push_back(info.name);
    }

    void averaged(const ParamInfo& info, const std::vector<std::string>& src_names) {
        std::vector<const Tensor*> ts;
        for (const auto& n : src_names) ts.push_back(&src.at(n));
        params.add(info.name, mean_tensors(ts));
        report_tensors[info.name] = {{"kind", "averaged"}, {"sources", src_names}};
        anchors.push_back(info.name);
    }

    /// Map one GNB tensor group given source-block name prefixes.
    void gnb(const std::string& tgt_prefix, const BlockProvenance& prov,
             const std::vector<std::string>& src_prefixes, const std::vector<ParamInfo>& infos,
             size_t& cursor, uint64_t seed) {
        for (const auto& suffix : gnb_suffixes()) {
            const ParamInfo& info = infos.at(cursor++);
            if (info.name != tgt_prefix + "." + suffix)
                throw std::logic_error("transplant: enumeration order mismatch at " + info.name);
            if (prov.kind == BlockProvenance::Kind::Fresh) {
                fresh(info, seed);
            } else if (src_prefixes.size() == 1) {
                copied(info, src_prefixes[0] + "." + suffix);
            } else {
                std::vector<std::string> names;
                for (const auto& p : src_prefixes) names.push_back(p + "." + suffix);
                averaged(info, names);
            }
        }
    }
};

std::string stage_prefix(int s) { return "gunet.stage" + std::to_string(s); }

}  // namespace

TransferResult transplant(const Checkpoint& src, const ModelConfig& tgt_config, const TransferOptions& opt) {
    tgt_config.validate();
    const ModelConfig& sc = src.config;
    if (sc.latent != tgt_config.latent)
        throw std::invalid_argument("transplant: latent width mismatch (source " + std::to_string(sc.latent) +
                                    ", target " + std::to_string(tgt_config.latent) + ")");
    if (sc.baseline() != tgt_config.baseline())
        throw std::invalid_argument("transplant: cannot map between baseline and staged architectures");

    auto infos = enumerate_params(tgt_config);
    Assembler as{src.params, {}, ordered_json::object(), {}};
    size_t cursor = 0;

    // Encoder tensors come first in enumeration order and are always fresh.
    while (cursor < infos.size() && infos[cursor].name.rfind("enc.", 0) == 0) as.fresh(infos[cursor++], opt.seed);

    if (tgt_config.baseline()) {
        auto bp = map_blocks(sc.m_proc, tgt_config.m_proc, opt.strategy);
        for (int i = 0; i < tgt_config.m_proc; ++i) {
            std::vector<std::string> srcs;
            for (int k : bp[i].sources) srcs.push_back("gunet.flat.gnb" + std::to_string(k));
            as.gnb("gunet.flat.gnb" + std::to_string(i), bp[i], srcs, infos, cursor, opt.seed);
        }
    } else {
        auto sp = map_blocks(sc.num_stages(), tgt_config.num_stages(), opt.strategy);
        for (int s = 0; s < tgt_config.num_stages(); ++s) {
            auto bp = map_blocks(sc.m_gu, tgt_config.m_gu, opt.strategy);
            for (const char* pr : {"prE", "prD"}) {
                for (int i = 0; i < tgt_config.m_gu; ++i) {
                    std::string tgt_prefix = stage_prefix(s) + "." + pr + ".gnb" + std::to_string(i);
                    if (sp[s].kind == BlockProvenance::Kind::Fresh) {
                        as.gnb(tgt_prefix, sp[s], {}, infos, cursor, opt.seed);
                        continue;
                    }
                    BlockProvenance combined = bp[i];
                    std::vector<std::string> srcs;
                    for (int j : sp[s].sources)
                        for (int k : combined.sources)
                            srcs.push_back(stage_prefix(j) + "." + pr + ".gnb" + std::to_string(k));
                    if (combined.kind == BlockProvenance::Kind::Fresh) {
                        as.gnb(tgt_prefix, combined, {}, infos, cursor, opt.seed);
                    } else {
                        // Averaged whenever more than one (stage, block) source
                        // feeds the slot.
                        BlockProvenance eff = combined;
                        if (sp[s].kind == BlockProvenance::Kind::Averaged)
                            eff.kind = BlockProvenance::Kind::Averaged;
                        as.gnb(tgt_prefix, eff, srcs, infos, cursor, opt.seed);
                    }
                }
            }
        }
        auto bp = map_blocks(sc.m_gu, tgt_config.m_gu, opt.strategy);
        for (int i = 0; i < tgt_config.m_gu; ++i) {
            std::vector<std::string> srcs;
            for (int k : bp[i].sources) srcs.push_back("gunet.bottom.gnb" + std::to_string(k));
            as.gnb("gunet.bottom.gnb" + std::to_string(i), bp[i], srcs, infos, cursor, opt.seed);
        }
    }

    // Decoder tensors close out the list, fresh like the encoder.
    while (cursor < infos.size()) as.fresh(infos[cursor++], opt.seed);

    TransferResult out;
    out.params = std::move(as.params);
    out.anchor_names = std::move(as.anchors);

    out.norms = Normalizers::make(tgt_config);
    bool norm_match = sc.dim == tgt_config.dim;
    if (norm_match) out.norms = src.norms;
    ordered_json norm_report = ordered_json::object();
    for (const auto& [name, n] : out.norms.entries()) {
        (void)n;
        norm_report[name] = norm_match ? "copied" : "fresh";
    }

    int copied = 0, averaged = 0, fresh = 0;
    for (const auto& [name, e] : as.report_tensors.items()) {
        (void)name;
        std::string k = e.at("kind").get<std::string>();
        if (k == "copied") ++copied;
        else if (k == "averaged") ++averaged;
        else ++fresh;
    }
    ordered_json report;
    report["strategy"] = strategy_name(opt.strategy);
    report["seed"] = opt.seed;
    report["source_config"] = config_to_json(sc);
    report["target_config"] = config_to_json(tgt_config);
    report["summary"] = {{"copied", copied}, {"averaged", averaged}, {"fresh", fresh}};
    report["anchors"] = out.anchor_names;
    report["tensors"] = as.report_tensors;
    report["normalizers"] = norm_report;
    out.report = std::move(report);
    return out;
}

AnchorSet make_anchors(const ParamStore& params, const std::vector<std::string>& names) {
    AnchorSet a;
    for (const auto& n : names) {
        auto it = params.index.find(n);
        if (it == params.index.end()) throw std::invalid_argument("anchors: unknown parameter " + n);
        a.param_index.push_back(it->second);
        a.values.push_back(params.tensors[it->second]);
    }
    return a;
}

double frobenius_penalty(const ParamStore& params, const AnchorSet& anchors) {
    double acc = 0.0;
    for (size_t i = 0; i < anchors.param_index.size(); ++i) {
        const Tensor& w = params.tensors[anchors.param_index[i]];
        const Tensor& w0 = anchors.values[i];
        if (!w.same_shape(w0)) throw std::invalid_argument("frobenius: anchor shape mismatch");
        for (size_t j = 0; j < w.size(); ++j) {
            double d = (double)w.data[j] - (double)w0.data[j];
            acc += d * d;
        }
    }
    return acc;
}

void add_frobenius_grad(const ParamStore& params, const AnchorSet& anchors, double lambda,
                        std::vector<Tensor>& grads) {
    if (grads.size() != params.size()) throw std::invalid_argument("frobenius: grads not store-aligned");
    for (size_t i = 0; i < anchors.param_index.size(); ++i) {
        int pi = anchors.param_index[i];
        const Tensor& w = params.tensors[pi];
        const Tensor& w0 = anchors.values[i];
        for (size_t j = 0; j < w.size(); ++j)
            grads[pi].data[j] += (float)(lambda * 2.0 * ((double)w.data[j] - (double)w0.data[j]));
    }
}

}  // namespace sgsim
