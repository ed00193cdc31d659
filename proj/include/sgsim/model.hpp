#pragma once

#include "sgsim/hetero_graph.hpp"
#include "sgsim/params.hpp"
#include "sgsim/pooling.hpp"
#include "sgsim/tape.hpp"

namespace sgsim {

/// Tape-side handles for one graph: normalized feature leaves plus the edge
/// index lists they belong to.
struct GraphVars {
    int xm = -1, xe = -1, emm = -1, eee = -1, eme = -1, eem = -1;
    const HeteroGraph* g = nullptr;
};

struct GnbVars {
    MlpVars edge_mlp, node_mlp;
};

template <typename S>
GnbVars bind_gnb(BinderT<S>& b, const std::string& prefix) {
    return {b.mlp(prefix + ".edge_mlp", true), b.mlp(prefix + ".node_mlp", true)};
}

/// One graph-net block: update edge features from both endpoints, then target
/// nodes from summed incident edges. Residual on both paths. Returns the new
/// (target nodes, edge features) var ids.
template <typename S>
std::pair<int, int> gnb_apply(TapeT<S>& tape, const GnbVars& gnb, int x_src, int x_tgt,
                              const std::vector<int>& esrc, const std::vector<int>& etgt, int efeat) {
    int e_in = tape.concat_cols({tape.gather_rows(x_src, esrc), tape.gather_rows(x_tgt, etgt), efeat});
    int e_new = tape.add(efeat, mlp_apply(tape, gnb.edge_mlp, e_in));
    int n_tgt = tape.val(x_tgt).shape[0];
    int agg = tape.segment_sum(e_new, etgt, n_tgt);
    int n_in = tape.concat_cols({x_tgt, agg});
    int x_new = tape.add(x_tgt, mlp_apply(tape, gnb.node_mlp, n_in));
    return {x_new, e_new};
}

/// Normalize raw graph features and register them as constant leaves.
template <typename S>
GraphVars make_graph_vars(TapeT<S>& tape, const HeteroGraph& g, const Normalizers& norms) {
    auto leaf_of = [&](const TensorT<double>& raw, const RunningNormalizer& nrm) {
        TensorT<double> x = raw;
        nrm.apply(x);
        return tape.leaf(x.template cast<S>(), false);
    };
    GraphVars v;
    v.g = &g;
    v.xm = leaf_of(g.xm, norms.in_xm);
    v.xe = leaf_of(g.xe, norms.in_xe);
    v.emm = leaf_of(g.mm.feat, norms.in_mm);
    v.eee = leaf_of(g.ee.feat, norms.in_ee);
    v.eme = leaf_of(g.me.feat, norms.in_me);
    v.eem = leaf_of(g.em.feat, norms.in_em);
    return v;
}

struct LatentState {
    int xm = -1, xe = -1, emm = -1, eee = -1, eme = -1, eem = -1;
};

/// Lift every feature family to the latent width, then run the three encoder
/// processors (vertex-vertex, element-element, vertex-to-element).
template <typename S>
LatentState encode(TapeT<S>& tape, BinderT<S>& b, const ModelConfig& cfg, const GraphVars& gv) {
    LatentState s;
    s.xm = mlp_apply(tape, b.mlp("enc.lift.xm", true), gv.xm);
    s.xe = mlp_apply(tape, b.mlp("enc.lift.xe", true), gv.xe);
    s.emm = mlp_apply(tape, b.mlp("enc.lift.mm", true), gv.emm);
    s.eee = mlp_apply(tape, b.mlp("enc.lift.ee", true), gv.eee);
    s.eme = mlp_apply(tape, b.mlp("enc.lift.me", true), gv.eme);
    s.eem = mlp_apply(tape, b.mlp("enc.lift.em", true), gv.eem);
    const HeteroGraph& g = *gv.g;
    for (int i = 0; i < cfg.m_enc; ++i) {
        auto [x, e] = gnb_apply(tape, bind_gnb(b, "enc.proc.mm.gnb" + std::to_string(i)), s.xm, s.xm,
                                g.mm.src, g.mm.tgt, s.emm);
        s.xm = x;
        s.emm = e;
    }
    for (int i = 0; i < cfg.m_enc; ++i) {
        auto [x, e] = gnb_apply(tape, bind_gnb(b, "enc.proc.ee.gnb" + std::to_string(i)), s.xe, s.xe,
                                g.ee.src, g.ee.tgt, s.eee);
        s.xe = x;
        s.eee = e;
    }
    for (int i = 0; i < cfg.m_enc; ++i) {
        auto [x, e] = gnb_apply(tape, bind_gnb(b, "enc.proc.me.gnb" + std::to_string(i)), s.xm, s.xe,
                                g.me.src, g.me.tgt, s.eme);
        s.xe = x;
        s.eme = e;
    }
    return s;
}

/// Staged U-net over the element graph (or the flat baseline). Each stage
/// runs its processor, saves the level, and mean-pools nodes and edges by the
/// plan's clustering; the way up broadcasts coarse features back, averages
/// them with the saved skip state and processes again.
template <typename S>
std::pair<int, int> gunet_apply(TapeT<S>& tape, BinderT<S>& b, const ModelConfig& cfg, int xe, int eee,
                                const std::vector<int>& src, const std::vector<int>& tgt,
                                const PoolingPlan& plan) {
    if (cfg.baseline()) {
        for (int i = 0; i < cfg.m_proc; ++i) {
            auto [x, e] = gnb_apply(tape, bind_gnb(b, "gunet.flat.gnb" + std::to_string(i)), xe, xe, src,
                                    tgt, eee);
            xe = x;
            eee = e;
        }
        return {xe, eee};
    }
    if ((int)plan.stages.size() != cfg.num_stages())
        throw std::invalid_argument("gunet: pooling plan does not match config stages");

    struct Level {
        int x, e;
        std::vector<int> src, tgt;
    };
    Level cur{xe, eee, src, tgt};
    std::vector<Level> saved;
    for (int s = 0; s < cfg.num_stages(); ++s) {
        std::string stage = "gunet.stage" + std::to_string(s);
        for (int i = 0; i < cfg.m_gu; ++i) {
            auto [x, e] = gnb_apply(tape, bind_gnb(b, stage + ".prE.gnb" + std::to_string(i)), cur.x, cur.x,
                                    cur.src, cur.tgt, cur.e);
            cur.x = x;
            cur.e = e;
        }
        saved.push_back(cur);

        const PoolingStage& st = plan.stages[s];
        if ((int)st.clustering.cluster_of.size() != tape.val(cur.x).shape[0])
            throw std::invalid_argument("gunet: plan stage " + std::to_string(s) +
                                        " was built for a different node count");
        int K = st.clustering.num_clusters;
        PooledGraph pg = build_pooled_graph(cur.src, cur.tgt, st.clustering.cluster_of, K);
        std::vector<S> inv_size(K);
        for (int k = 0; k < K; ++k) inv_size[k] = S(1) / S(st.cluster_size[k]);
        int xp = tape.row_scale(tape.segment_sum(cur.x, st.clustering.cluster_of, K), std::move(inv_size));
        int ep;
        if (pg.pairs.empty()) {
            ep = tape.leaf(TensorT<S>({0, cfg.latent}), false);
        } else {
            int P = (int)pg.pairs.size();
            std::vector<S> inv_cnt(P);
            for (int k = 0; k < P; ++k) inv_cnt[k] = S(1) / S(pg.pair_count[k]);
            int per_pair = tape.row_scale(tape.segment_sum(cur.e, pg.fine_edge_pair, P), std::move(inv_cnt));
            ep = tape.gather_rows(per_pair, pg.dir_pair);
        }
        cur = Level{xp, ep, std::move(pg.src), std::move(pg.tgt)};
    }
    for (int i = 0; i < cfg.m_gu; ++i) {
        auto [x, e] = gnb_apply(tape, bind_gnb(b, "gunet.bottom.gnb" + std::to_string(i)), cur.x, cur.x,
                                cur.src, cur.tgt, cur.e);
        cur.x = x;
        cur.e = e;
    }
    for (int s = cfg.num_stages() - 1; s >= 0; --s) {
        const Level& sv = saved[s];
        int xu = tape.gather_rows(cur.x, plan.stages[s].clustering.cluster_of);
        int xm = tape.scale(tape.add(xu, sv.x), S(0.5));
        cur = Level{xm, sv.e, sv.src, sv.tgt};
        std::string stage = "gunet.stage" + std::to_string(s);
        for (int i = 0; i < cfg.m_gu; ++i) {
            auto [x, e] = gnb_apply(tape, bind_gnb(b, stage + ".prD.gnb" + std::to_string(i)), cur.x, cur.x,
                                    cur.src, cur.tgt, cur.e);
            cur.x = x;
            cur.e = e;
        }
    }
    return {cur.x, cur.e};
}

/// Element head directly off the final element latents; mesh head after one
/// interpolation block that carries element latents onto the vertices.
template <typename S>
std::pair<int, int> decode(TapeT<S>& tape, BinderT<S>& b, const ModelConfig& cfg, int xe_final,
                           const LatentState& enc, const HeteroGraph& g) {
    (void)cfg;
    int out_e = mlp_apply(tape, b.mlp("dec.out_e", false), xe_final);
    auto [xm_dec, e_unused] = gnb_apply(tape, bind_gnb(b, "dec.interp"), xe_final, enc.xm, g.em.src,
                                        g.em.tgt, enc.eem);
    (void)e_unused;
    int out_m = mlp_apply(tape, b.mlp("dec.out_m", false), xm_dec);
    return {out_m, out_e};
}

struct ForwardOut {
    int pred_m = -1;  // [num mesh vertices, dim], normalized delta
    int pred_e = -1;  // [num elements, dim], normalized delta
};

template <typename S>
ForwardOut forward_graph(TapeT<S>& tape, BinderT<S>& b, const ModelConfig& cfg, const HeteroGraph& g,
                         const PoolingPlan& plan, const Normalizers& norms) {
    if (g.dim != cfg.dim) throw std::invalid_argument("forward: graph dim != config dim");
    GraphVars gv = make_graph_vars(tape, g, norms);
    LatentState enc = encode(tape, b, cfg, gv);
    auto [xe_final, eee_final] = gunet_apply(tape, b, cfg, enc.xe, enc.eee, g.ee.src, g.ee.tgt, plan);
    (void)eee_final;
    auto [out_m, out_e] = decode(tape, b, cfg, xe_final, enc, g);
    return {out_m, out_e};
}

/// Static pooling schedule for one mesh topology.
inline PoolingPlan plan_for_state(const MeshState& state, const ModelConfig& cfg) {
    if (cfg.baseline()) return {};
    return build_pooling_plan(element_mesh_adjacency(state), element_materials(state), cfg.pooling_ratios);
}

/// Mean squared error of normalized deltas over all nodes of both families.
/// Prescribed vertices are dropped from the numerator; the denominator stays
/// the full node count.
template <typename S>
int task_loss(TapeT<S>& tape, const ForwardOut& pred, const TensorT<double>& tgt_m_raw,
              const TensorT<double>& tgt_e_raw, const std::vector<int>& boundary,
              const Normalizers& norms) {
    TensorT<double> tm = tgt_m_raw, te = tgt_e_raw;
    norms.out_m.apply(tm);
    norms.out_e.apply(te);
    int nm = tm.rows(), ne = te.rows();
    if ((int)boundary.size() != nm) throw std::invalid_argument("task_loss: boundary flag count mismatch");
    int dm = tape.sub(pred.pred_m, tape.leaf(tm.cast<S>(), false));
    int de = tape.sub(pred.pred_e, tape.leaf(te.cast<S>(), false));
    std::vector<S> wm(nm);
    for (int i = 0; i < nm; ++i) wm[i] = boundary[i] ? S(0) : S(1);
    int sm = tape.weighted_sumsq(dm, std::move(wm));
    int se = tape.weighted_sumsq(de, std::vector<S>(ne, S(1)));
    return tape.scale(tape.add(sm, se), S(1) / S(nm + ne));
}

}  // namespace sgsim
