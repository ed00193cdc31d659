#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "sgsim/model.hpp"
#include "sgsim/rng.hpp"

using namespace sgsim;

namespace {

using DTensor = TensorT<double>;
using DStore = ParamStoreT<double>;
using DTape = TapeT<double>;
using DBinder = BinderT<double>;

DTensor random_tensor(const std::vector<int>& shape, Rng& rng, double scale = 1.0) {
    DTensor t(shape);
    for (auto& v : t.data) v = rng.uniform(-scale, scale);
    return t;
}

/// Triangle strip along x: vertices b_i=(i,0), t_i=(i,1) interleaved, two
/// triangles per column. Element adjacency is a path 0..2k-1.
MeshState strip_state(int k, uint64_t deform_seed = 0, double amp = 0.1) {
    MeshState m;
    m.dim = 2;
    int nv = 2 * (k + 1);
    m.rest = DTensor({nv, 2});
    for (int i = 0; i <= k; ++i) {
        m.rest.at(2 * i, 0) = i;
        m.rest.at(2 * i, 1) = 0.0;
        m.rest.at(2 * i + 1, 0) = i;
        m.rest.at(2 * i + 1, 1) = 1.0;
    }
    m.pos = m.rest;
    m.boundary.assign(nv, 0);
    m.boundary[0] = 1;
    m.vertex_body.assign(nv, 0);
    for (int i = 0; i < k; ++i) {
        int b0 = 2 * i, b1 = 2 * (i + 1), t0 = 2 * i + 1, t1 = 2 * i + 3;
        m.elements.insert(m.elements.end(), {b0, b1, t0});
        m.elements.insert(m.elements.end(), {b1, t1, t0});
    }
    int ne = 2 * k;
    m.lambda.assign(ne, 1.0);
    m.mu.assign(ne, 0.5);
    m.element_body.assign(ne, 0);
    if (deform_seed) {
        Rng rng(deform_seed);
        for (int v = 0; v < nv; ++v)
            if (!m.boundary[v])
                for (int d = 0; d < 2; ++d) m.pos.at(v, d) += rng.uniform(-amp, amp);
    }
    return m;
}

std::vector<std::vector<int>> path_adj(int n) {
    std::vector<std::vector<int>> adj(n);
    for (int i = 0; i + 1 < n; ++i) {
        adj[i].push_back(i + 1);
        adj[i + 1].push_back(i);
    }
    return adj;
}

struct LossProblem {
    ModelConfig cfg;
    HeteroGraph g;
    PoolingPlan plan;
    Normalizers norms;
    DTensor tgt_m, tgt_e;
    std::vector<int> boundary;
};

LossProblem make_problem(const ModelConfig& cfg, const MeshState& state, uint64_t seed) {
    LossProblem p{cfg, build_hetero_graph(state, cfg.world_radius), plan_for_state(state, cfg),
                  Normalizers::make(cfg), {}, {}, state.boundary};
    Rng rng(seed);
    p.tgt_m = random_tensor({p.g.num_mesh, cfg.dim}, rng, 0.5);
    p.tgt_e = random_tensor({p.g.num_elem, cfg.dim}, rng, 0.5);
    return p;
}

double eval_loss(const DStore& store, const LossProblem& p, std::vector<DTensor>* grads = nullptr) {
    DTape tape;
    DBinder b(tape, store, grads != nullptr);
    ForwardOut out = forward_graph(tape, b, p.cfg, p.g, p.plan, p.norms);
    int loss = task_loss(tape, out, p.tgt_m, p.tgt_e, p.boundary, p.norms);
    if (grads) {
        tape.backward(loss);
        b.accumulate_grads(*grads);
    }
    return tape.val(loss).data[0];
}

/// Zero-filled MLP parameter set under `prefix` (layer-norm scale stays 1),
/// which turns an output-normalized MLP into the constant zero map.
void add_zero_mlp(DStore& store, const std::string& prefix, int in, int latent, bool output_norm = true) {
    store.add(prefix + ".w0", DTensor({in, latent}));
    store.add(prefix + ".b0", DTensor({latent}));
    store.add(prefix + ".w1", DTensor({latent, latent}));
    store.add(prefix + ".b1", DTensor({latent}));
    store.add(prefix + ".w2", DTensor({latent, latent}));
    store.add(prefix + ".b2", DTensor({latent}));
    if (output_norm) {
        DTensor g({latent});
        g.fill(1.0);
        store.add(prefix + ".ln_g", std::move(g));
        store.add(prefix + ".ln_b", DTensor({latent}));
    }
}

/// Rows of pred_e whose values differ between two forward passes.
std::set<int> changed_rows(const DTensor& a, const DTensor& b) {
    std::set<int> out;
    REQUIRE(a.shape == b.shape);
    for (int r = 0; r < a.rows(); ++r)
        for (int j = 0; j < a.cols(); ++j)
            if (a.at(r, j) != b.at(r, j)) {
                out.insert(r);
                break;
            }
    return out;
}

DTensor predict_e(const DStore& store, const ModelConfig& cfg, const HeteroGraph& g,
                  const PoolingPlan& plan, const Normalizers& norms) {
    DTape tape;
    DBinder b(tape, store, false);
    ForwardOut out = forward_graph(tape, b, cfg, g, plan, norms);
    return tape.val(out.pred_e);
}

}  // namespace

TEST_CASE("zeroed graph-net block passes node and edge features through unchanged") {
    int L = 6;
    DStore store;
    add_zero_mlp(store, "blk.edge_mlp", 3 * L, L);
    add_zero_mlp(store, "blk.node_mlp", 2 * L, L);
    Rng rng(11);
    DTensor x = random_tensor({4, L}, rng);
    DTensor e = random_tensor({6, L}, rng);
    std::vector<int> src = {0, 1, 1, 2, 2, 3}, tgt = {1, 0, 2, 1, 3, 2};

    DTape tape;
    DBinder b(tape, store, false);
    GnbVars gnb = bind_gnb(b, "blk");
    int xv = tape.leaf(x), ev = tape.leaf(e);
    auto [x2, e2] = gnb_apply(tape, gnb, xv, xv, src, tgt, ev);
    CHECK(tape.val(x2).data == x.data);
    CHECK(tape.val(e2).data == e.data);
}

TEST_CASE("isolated node gets an all-zero aggregation, not special-casing") {
    int L = 5;
    DStore store;
    Rng rng(12);
    store.add("blk.edge_mlp.w0", random_tensor({3 * L, L}, rng, 0.4));
    store.add("blk.edge_mlp.b0", random_tensor({L}, rng, 0.1));
    store.add("blk.edge_mlp.w1", random_tensor({L, L}, rng, 0.4));
    store.add("blk.edge_mlp.b1", random_tensor({L}, rng, 0.1));
    store.add("blk.edge_mlp.w2", random_tensor({L, L}, rng, 0.4));
    store.add("blk.edge_mlp.b2", random_tensor({L}, rng, 0.1));
    DTensor g1({L});
    g1.fill(1.0);
    store.add("blk.edge_mlp.ln_g", g1);
    store.add("blk.edge_mlp.ln_b", DTensor({L}));
    store.add("blk.node_mlp.w0", random_tensor({2 * L, L}, rng, 0.4));
    store.add("blk.node_mlp.b0", random_tensor({L}, rng, 0.1));
    store.add("blk.node_mlp.w1", random_tensor({L, L}, rng, 0.4));
    store.add("blk.node_mlp.b1", random_tensor({L}, rng, 0.1));
    store.add("blk.node_mlp.w2", random_tensor({L, L}, rng, 0.4));
    store.add("blk.node_mlp.b2", random_tensor({L}, rng, 0.1));
    store.add("blk.node_mlp.ln_g", g1);
    store.add("blk.node_mlp.ln_b", DTensor({L}));

    DTensor x = random_tensor({3, L}, rng);
    DTensor e = random_tensor({2, L}, rng);
    std::vector<int> src = {0, 1}, tgt = {1, 0};  // node 2 isolated

    DTape tape;
    DBinder b(tape, store, false);
    GnbVars gnb = bind_gnb(b, "blk");
    int xv = tape.leaf(x), ev = tape.leaf(e);
    auto [x2, e2] = gnb_apply(tape, gnb, xv, xv, src, tgt, ev);
    (void)e2;

    // Recompute row 2 by hand: x + node_mlp(x || 0).
    DTape tape2;
    DBinder b2(tape2, store, false);
    MlpVars nm = b2.mlp("blk.node_mlp", true);
    DTensor xrow({1, L});
    for (int j = 0; j < L; ++j) xrow.at(0, j) = x.at(2, j);
    int cat = tape2.concat_cols({tape2.leaf(xrow), tape2.leaf(DTensor({1, L}))});
    int want = tape2.add(tape2.leaf(xrow), mlp_apply(tape2, nm, cat));
    for (int j = 0; j < L; ++j) CHECK(tape.val(x2).at(2, j) == tape2.val(want).at(0, j));
}

TEST_CASE("ratio-1 single stage with zeroed processors is the identity") {
    ModelConfig cfg;
    cfg.dim = 2;
    cfg.latent = 8;
    cfg.m_enc = 0;
    cfg.m_gu = 1;
    cfg.pooling_ratios = {1};  // below the config minimum; exercised directly

    // Tensor names depend only on the stage count, so a valid config with the
    // same shape seeds the store for the ratio-1 run.
    ModelConfig init_cfg = cfg;
    init_cfg.pooling_ratios = {2};
    DStore store = init_params<double>(init_cfg, 21);
    for (size_t i = 0; i < store.names.size(); ++i)
        if (store.names[i].rfind("gunet.", 0) == 0 && store.names[i].find(".w") != std::string::npos)
            store.tensors[i].fill(0.0);

    int ne = 6;
    std::vector<int> src, tgt;
    for (int i = 0; i + 1 < ne; ++i) {
        src.push_back(i);
        tgt.push_back(i + 1);
        src.push_back(i + 1);
        tgt.push_back(i);
    }
    PoolingPlan plan;
    PoolingStage st;
    st.clustering = dfs_cluster(path_adj(ne), std::vector<int>(ne, 0), 1);
    REQUIRE(st.clustering.num_clusters == ne);
    st.cluster_size.assign(ne, 1);
    st.materials.assign(ne, 0);
    st.adjacency = path_adj(ne);
    plan.stages.push_back(st);

    Rng rng(5);
    DTensor x = random_tensor({ne, cfg.latent}, rng);
    DTensor e = random_tensor({(int)src.size(), cfg.latent}, rng);
    DTape tape;
    DBinder b(tape, store, false);
    auto [xo, eo] = gunet_apply(tape, b, cfg, tape.leaf(x), tape.leaf(e), src, tgt, plan);
    CHECK(tape.val(xo).data == x.data);
    CHECK(tape.val(eo).data == e.data);
}

TEST_CASE("staged network rejects a plan that does not match the config or node count") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 0;
    cfg.m_gu = 1;
    cfg.pooling_ratios = {2};
    DStore store = init_params<double>(cfg, 4);
    Rng rng(6);
    DTensor x = random_tensor({4, 8}, rng);
    DTensor e = random_tensor({6, 8}, rng);
    std::vector<int> src = {0, 1, 1, 2, 2, 3}, tgt = {1, 0, 2, 1, 3, 2};

    DTape t1;
    DBinder b1(t1, store, false);
    CHECK_THROWS_AS(gunet_apply(t1, b1, cfg, t1.leaf(x), t1.leaf(e), src, tgt, PoolingPlan{}),
                    std::invalid_argument);

    PoolingPlan wrong;
    PoolingStage st;
    st.clustering = dfs_cluster(path_adj(6), std::vector<int>(6, 0), 2);
    st.cluster_size.assign(st.clustering.num_clusters, 2);
    wrong.stages.push_back(st);
    DTape t2;
    DBinder b2(t2, store, false);
    CHECK_THROWS_AS(gunet_apply(t2, b2, cfg, t2.leaf(x), t2.leaf(e), src, tgt, wrong),
                    std::invalid_argument);
}

TEST_CASE("baseline mode is exactly a stack of flat blocks") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 1;
    cfg.m_proc = 2;
    cfg.validate();
    DStore store = init_params<double>(cfg, 31);

    MeshState state = strip_state(4, 91);
    HeteroGraph g = build_hetero_graph(state, 0.0);
    Normalizers norms = Normalizers::make(cfg);

    DTape tape;
    DBinder b(tape, store, false);
    GraphVars gv = make_graph_vars(tape, g, norms);
    LatentState enc = encode(tape, b, cfg, gv);
    auto [x_auto, e_auto] = gunet_apply(tape, b, cfg, enc.xe, enc.eee, g.ee.src, g.ee.tgt, PoolingPlan{});

    int x = enc.xe, e = enc.eee;
    for (int i = 0; i < 2; ++i) {
        auto [xn, en] =
            gnb_apply(tape, bind_gnb(b, "gunet.flat.gnb" + std::to_string(i)), x, x, g.ee.src, g.ee.tgt, e);
        x = xn;
        e = en;
    }
    CHECK(tape.val(x_auto).data == tape.val(x).data);
    CHECK(tape.val(e_auto).data == tape.val(e).data);
}

TEST_CASE("encoder with zero processor depth is just the lifting layers") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 0;
    cfg.m_proc = 1;
    DStore store = init_params<double>(cfg, 8);
    MeshState state = strip_state(3, 17);
    HeteroGraph g = build_hetero_graph(state, 0.0);
    Normalizers norms = Normalizers::make(cfg);

    DTape tape;
    DBinder b(tape, store, false);
    GraphVars gv = make_graph_vars(tape, g, norms);
    LatentState enc = encode(tape, b, cfg, gv);
    int lift = mlp_apply(tape, b.mlp("enc.lift.xe", true), gv.xe);
    CHECK(tape.val(enc.xe).data == tape.val(lift).data);
    CHECK(tape.val(enc.xe).cols() == cfg.latent);
    CHECK(tape.val(enc.emm).cols() == cfg.latent);
}

TEST_CASE("graph leaves honor the input normalizers") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_proc = 1;
    Normalizers norms = Normalizers::make(cfg);
    DTensor stats({2, 3}, {1, 2, 3, 3, 6, 9});
    norms.in_xm.update(stats);

    MeshState state = strip_state(2, 23);
    HeteroGraph g = build_hetero_graph(state, 0.0);
    DTape tape;
    GraphVars gv = make_graph_vars(tape, g, norms);
    for (int r = 0; r < g.xm.rows(); ++r)
        for (int j = 0; j < 3; ++j) {
            double mean = (stats.at(0, j) + stats.at(1, j)) / 2;
            double sd = std::sqrt((std::pow(stats.at(0, j) - mean, 2) + std::pow(stats.at(1, j) - mean, 2)) / 2);
            double want = (g.xm.at(r, j) - mean) / sd;
            CHECK(tape.val(gv.xm).at(r, j) == doctest::Approx(want).epsilon(1e-12));
        }
    // Untouched families stay raw.
    CHECK(tape.val(gv.xe).data == g.xe.data);
}

TEST_CASE("forward is deterministic, shape-correct, and rejects a dim mismatch") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 1;
    cfg.m_gu = 1;
    cfg.pooling_ratios = {2};
    cfg.validate();
    MeshState state = strip_state(4, 7);
    LossProblem p = make_problem(cfg, state, 40);
    DStore store = init_params<double>(cfg, 41);

    DTape t1, t2;
    DBinder b1(t1, store, false), b2(t2, store, false);
    ForwardOut o1 = forward_graph(t1, b1, cfg, p.g, p.plan, p.norms);
    ForwardOut o2 = forward_graph(t2, b2, cfg, p.g, p.plan, p.norms);
    CHECK(t1.val(o1.pred_m).shape == std::vector<int>{p.g.num_mesh, 2});
    CHECK(t1.val(o1.pred_e).shape == std::vector<int>{p.g.num_elem, 2});
    CHECK(t1.val(o1.pred_m).data == t2.val(o2.pred_m).data);
    CHECK(t1.val(o1.pred_e).data == t2.val(o2.pred_e).data);

    ModelConfig cfg3 = cfg;
    cfg3.dim = 3;
    DTape t3;
    DBinder b3(t3, store, false);
    CHECK_THROWS_AS(forward_graph(t3, b3, cfg3, p.g, p.plan, p.norms), std::invalid_argument);
}

TEST_CASE("zeroing the output heads zeroes every prediction") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 1;
    cfg.m_proc = 1;
    cfg.validate();
    DStore store = init_params<double>(cfg, 50);
    for (size_t i = 0; i < store.names.size(); ++i)
        if (store.names[i].rfind("dec.out_m.", 0) == 0 || store.names[i].rfind("dec.out_e.", 0) == 0)
            store.tensors[i].fill(0.0);
    MeshState state = strip_state(3, 51);
    LossProblem p = make_problem(cfg, state, 52);
    DTape tape;
    DBinder b(tape, store, false);
    ForwardOut out = forward_graph(tape, b, cfg, p.g, p.plan, p.norms);
    for (double v : tape.val(out.pred_m).data) CHECK(v == 0.0);
    for (double v : tape.val(out.pred_e).data) CHECK(v == 0.0);
}

TEST_CASE("full forward+loss gradients match finite differences") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 1;
    cfg.m_gu = 1;
    cfg.pooling_ratios = {2};
    cfg.validate();
    MeshState state = strip_state(5, 61);  // 10 elements
    LossProblem p = make_problem(cfg, state, 62);
    DStore store = init_params<double>(cfg, 63);

    std::vector<DTensor> grads;
    double base = eval_loss(store, p, &grads);
    CHECK(std::isfinite(base));
    CHECK(base > 0.0);

    // Every encoder lift must already receive gradient (end-to-end flow).
    int enc_idx = store.index.at("enc.lift.xm.w0");
    double enc_norm = 0.0;
    for (double v : grads[enc_idx].data) enc_norm += v * v;
    CHECK(enc_norm > 0.0);

    std::vector<std::string> probes = {
        "enc.lift.xm.w0",           "enc.lift.ee.b1",
        "enc.proc.mm.gnb0.edge_mlp.w1", "enc.proc.ee.gnb0.node_mlp.w0",
        "enc.proc.me.gnb0.node_mlp.ln_g", "gunet.stage0.prE.gnb0.edge_mlp.w0",
        "gunet.stage0.prD.gnb0.node_mlp.w2", "gunet.bottom.gnb0.edge_mlp.b0",
        "gunet.stage0.prE.gnb0.node_mlp.ln_b", "dec.interp.edge_mlp.w0",
        "dec.out_m.w2",             "dec.out_e.w0",
    };
    Rng rng(64);
    double h = 1e-5;
    for (const auto& name : probes) {
        int idx = store.index.at(name);
        size_t k = (size_t)rng.uniform_int((int)store.tensors[idx].size());
        double saved = store.tensors[idx].data[k];
        store.tensors[idx].data[k] = saved + h;
        double up = eval_loss(store, p);
        store.tensors[idx].data[k] = saved - h;
        double dn = eval_loss(store, p);
        store.tensors[idx].data[k] = saved;
        double fd = (up - dn) / (2 * h);
        double ad = grads[idx].data[k];
        double rel = std::abs(ad - fd) / std::max({1e-8, std::abs(ad), std::abs(fd)});
        INFO(name << "[" << k << "] ad=" << ad << " fd=" << fd);
        CHECK(rel <= 1e-6);
    }
}

TEST_CASE("permuting vertices and elements permutes the predictions") {
    for (bool staged : {false, true}) {
        ModelConfig cfg;
        cfg.latent = 8;
        cfg.m_enc = 1;
        if (staged)
            cfg.pooling_ratios = {2}, cfg.m_gu = 1;
        else
            cfg.m_proc = 2;
        cfg.validate();

        MeshState state = strip_state(4, 71);
        DStore store = init_params<double>(cfg, 72);
        Normalizers norms = Normalizers::make(cfg);
        Rng nr(73);
        for (auto& [name, nrm] : norms.entries()) {
            DTensor rows = random_tensor({3, nrm->width}, nr);
            nrm->update(rows);
        }
        PoolingPlan plan = plan_for_state(state, cfg);
        HeteroGraph g1 = build_hetero_graph(state, 0.0);

        int nv = state.num_vertices(), ne = state.num_elements();
        Rng pr(74);
        std::vector<int> pv(nv), pe(ne);
        for (int i = 0; i < nv; ++i) pv[i] = i;
        for (int i = 0; i < ne; ++i) pe[i] = i;
        for (int i = nv - 1; i > 0; --i) std::swap(pv[i], pv[pr.uniform_int(i + 1)]);
        for (int i = ne - 1; i > 0; --i) std::swap(pe[i], pe[pr.uniform_int(i + 1)]);

        MeshState perm = state;
        for (int v = 0; v < nv; ++v) {
            for (int d = 0; d < 2; ++d) {
                perm.rest.at(pv[v], d) = state.rest.at(v, d);
                perm.pos.at(pv[v], d) = state.pos.at(v, d);
            }
            perm.boundary[pv[v]] = state.boundary[v];
            perm.vertex_body[pv[v]] = state.vertex_body[v];
        }
        int vpe = state.verts_per_element();
        for (int e = 0; e < ne; ++e) {
            perm.lambda[pe[e]] = state.lambda[e];
            perm.mu[pe[e]] = state.mu[e];
            perm.element_body[pe[e]] = state.element_body[e];
            for (int k = 0; k < vpe; ++k) perm.elements[pe[e] * vpe + k] = pv[state.elements[e * vpe + k]];
        }
        PoolingPlan plan2 = plan;
        if (staged)
            for (int e = 0; e < ne; ++e)
                plan2.stages[0].clustering.cluster_of[pe[e]] = plan.stages[0].clustering.cluster_of[e];
        HeteroGraph g2 = build_hetero_graph(perm, 0.0);

        DTape t1, t2;
        DBinder b1(t1, store, false), b2(t2, store, false);
        ForwardOut o1 = forward_graph(t1, b1, cfg, g1, plan, norms);
        ForwardOut o2 = forward_graph(t2, b2, cfg, g2, plan2, norms);
        const DTensor &m1 = t1.val(o1.pred_m), &m2 = t2.val(o2.pred_m);
        const DTensor &e1 = t1.val(o1.pred_e), &e2 = t2.val(o2.pred_e);
        for (int v = 0; v < nv; ++v)
            for (int d = 0; d < 2; ++d)
                CHECK(m2.at(pv[v], d) == doctest::Approx(m1.at(v, d)).epsilon(1e-9));
        for (int e = 0; e < ne; ++e)
            for (int d = 0; d < 2; ++d)
                CHECK(e2.at(pe[e], d) == doctest::Approx(e1.at(e, d)).epsilon(1e-9));
    }
}

TEST_CASE("translating the scene leaves predictions unchanged") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 1;
    cfg.m_gu = 1;
    cfg.pooling_ratios = {2};
    cfg.validate();
    MeshState state = strip_state(4, 81);
    DStore store = init_params<double>(cfg, 82);
    Normalizers norms = Normalizers::make(cfg);
    PoolingPlan plan = plan_for_state(state, cfg);

    MeshState moved = state;
    for (int v = 0; v < state.num_vertices(); ++v)
        for (int d = 0; d < 2; ++d) {
            double off = d == 0 ? 0.37 : -0.81;
            moved.rest.at(v, d) += off;
            moved.pos.at(v, d) += off;
        }

    DTape t1, t2;
    DBinder b1(t1, store, false), b2(t2, store, false);
    ForwardOut o1 = forward_graph(t1, b1, cfg, build_hetero_graph(state, 0.0), plan, norms);
    ForwardOut o2 = forward_graph(t2, b2, cfg, build_hetero_graph(moved, 0.0), plan, norms);
    const DTensor &m1 = t1.val(o1.pred_m), &m2 = t2.val(o2.pred_m);
    for (size_t i = 0; i < m1.size(); ++i) CHECK(m1.data[i] == doctest::Approx(m2.data[i]).epsilon(1e-9));
    const DTensor &e1 = t1.val(o1.pred_e), &e2 = t2.val(o2.pred_e);
    for (size_t i = 0; i < e1.size(); ++i) CHECK(e1.data[i] == doctest::Approx(e2.data[i]).epsilon(1e-9));
}

TEST_CASE("tape-side pooling agrees with the reference pooling functions") {
    Rng rng(90);
    Clustering c = dfs_cluster(path_adj(7), std::vector<int>(7, 0), 3);
    REQUIRE(c.num_clusters == 3);
    DTensor x = random_tensor({7, 4}, rng);

    DTape tape;
    int xv = tape.leaf(x);
    std::vector<int> sizes(c.num_clusters, 0);
    for (int k : c.cluster_of) ++sizes[k];
    std::vector<double> inv(c.num_clusters);
    for (int k = 0; k < c.num_clusters; ++k) inv[k] = 1.0 / sizes[k];
    int xp = tape.row_scale(tape.segment_sum(xv, c.cluster_of, c.num_clusters), inv);
    DTensor want = pool_node_features(x, c);
    for (size_t i = 0; i < want.size(); ++i)
        CHECK(tape.val(xp).data[i] == doctest::Approx(want.data[i]).epsilon(1e-14));

    int xu = tape.gather_rows(xp, c.cluster_of);
    DTensor wantu = unpool_node_features(want, c);
    for (size_t i = 0; i < wantu.size(); ++i)
        CHECK(tape.val(xu).data[i] == doctest::Approx(wantu.data[i]).epsilon(1e-14));

    std::vector<int> src, tgt;
    for (int i = 0; i + 1 < 7; ++i) {
        src.push_back(i);
        tgt.push_back(i + 1);
        src.push_back(i + 1);
        tgt.push_back(i);
    }
    PooledGraph pg = build_pooled_graph(src, tgt, c.cluster_of, c.num_clusters);
    DTensor ef = random_tensor({(int)src.size(), 4}, rng);
    std::vector<double> invc(pg.pairs.size());
    for (size_t k = 0; k < pg.pairs.size(); ++k) invc[k] = 1.0 / pg.pair_count[k];
    int ep = tape.row_scale(tape.segment_sum(tape.leaf(ef), pg.fine_edge_pair, (int)pg.pairs.size()), invc);
    DTensor wante = pool_edge_features(ef, pg);
    for (size_t i = 0; i < wante.size(); ++i)
        CHECK(tape.val(ep).data[i] == doctest::Approx(wante.data[i]).epsilon(1e-14));
}

TEST_CASE("baseline influence never escapes the message-passing depth") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 1;
    cfg.m_proc = 2;
    cfg.validate();
    MeshState state = strip_state(6, 0);  // 12 elements in a path
    HeteroGraph g = build_hetero_graph(state, 0.0);
    Normalizers norms = Normalizers::make(cfg);
    DStore store = init_params<double>(cfg, 100);

    DTensor base = predict_e(store, cfg, g, {}, norms);
    int j = 6, radius = cfg.m_enc + cfg.m_proc;
    HeteroGraph pert = g;
    pert.xe.at(j, 2) += 1.0;
    DTensor out = predict_e(store, cfg, pert, {}, norms);

    // Rows beyond the hop radius are bitwise untouched. Rows exactly on the
    // rim hang off a single multiplicative chain that dead ReLU units can
    // sever, so the rim is an upper bound, and liveness is required only one
    // hop in.
    std::set<int> affected = changed_rows(base, out);
    for (int e : affected) CHECK(std::abs(e - j) <= radius);
    for (int e = j - radius + 1; e <= j + radius - 1; ++e) CHECK(affected.count(e) == 1);
}

TEST_CASE("staged influence overshoots the nominal radius only by cluster rounding") {
    ModelConfig cfg;
    cfg.latent = 8;
    cfg.m_enc = 1;
    cfg.m_gu = 2;
    cfg.pooling_ratios = {2};
    cfg.validate();
    int r = receptive_field(cfg.m_enc, cfg.m_gu, cfg.pooling_ratios, 0);
    REQUIRE(r == 8);

    MeshState state = strip_state(12, 0);  // 24 elements in a path
    HeteroGraph g = build_hetero_graph(state, 0.0);
    PoolingPlan plan = plan_for_state(state, cfg);
    // Consecutive pairs, so the source's cluster offset is known exactly.
    REQUIRE(plan.stages[0].clustering.cluster_of ==
            std::vector<int>{0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5, 6, 6, 7, 7, 8, 8, 9, 9, 10, 10, 11, 11});
    Normalizers norms = Normalizers::make(cfg);
    DStore store = init_params<double>(cfg, 101);

    DTensor base = predict_e(store, cfg, g, plan, norms);
    int j = 12;
    HeteroGraph pert = g;
    pert.xe.at(j, 2) += 1.0;
    DTensor out = predict_e(store, cfg, pert, plan, norms);

    // Down/up rounding to cluster boundaries stretches the worst-case reach
    // of this even source to r+2 on the left and r+1 on the right. Rim rows
    // sit on single chains that dead ReLU units can sever, so the window is
    // an upper bound and liveness is required only up to r-1.
    std::set<int> affected = changed_rows(base, out);
    for (int e : affected) {
        CHECK(e >= j - (r + 2));
        CHECK(e <= j + (r + 1));
    }
    for (int e = j - (r - 1); e <= j + (r - 1); ++e) CHECK(affected.count(e) == 1);
}
