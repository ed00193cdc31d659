#include "sgsim/pooling.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>
#include <string>

namespace sgsim {

Clustering dfs_cluster(const std::vector<std::vector<int>>& adjacency, const std::vector<int>& materials,
                       int p) {
    int n = (int)adjacency.size();
    if ((int)materials.size() != n) throw std::invalid_argument("dfs_cluster: materials size mismatch");
    if (p < 1) throw std::invalid_argument("dfs_cluster: pooling ratio must be >= 1");
    for (const auto& nb : adjacency)
        for (int v : nb)
            if (v < 0 || v >= n) throw std::invalid_argument("dfs_cluster: neighbor id out of range");

    Clustering out;
    out.cluster_of.assign(n, -1);
    if (n == 0) return out;

    std::vector<char> left(n, 1);
    int cid = -1;
    int cnt = 0;
    // cnt always equals the member count of cluster cid, so clusters never
    // exceed p nodes.
    auto enter = [&](int v) {
        out.cluster_of[v] = cid;
        if (++cnt >= p) {
            ++cid;
            cnt = 0;
        }
    };

    // Iterative DFS with the same visit order as the recursive form: at each
    // node, descend into the smallest unvisited same-material neighbor.
    std::vector<std::pair<int, size_t>> stack;  // node, next-neighbor cursor
    for (int root = 0; root < n; ++root) {
        if (!left[root]) continue;
        left[root] = 0;
        // A fresh root only opens a new cluster if the current one has
        // members; with cid == -1 the unassigned entries count as members,
        // which starts the very first cluster at 0.
        if (cnt > 0 || cid == -1) {
            ++cid;
            cnt = 0;
        }
        int mat = materials[root];
        enter(root);
        stack.clear();
        stack.emplace_back(root, 0);
        while (!stack.empty()) {
            auto& [v, cur] = stack.back();
            const auto& nb = adjacency[v];
            bool descended = false;
            while (cur < nb.size()) {
                int u = nb[cur++];
                if (left[u] && materials[u] == mat) {
                    left[u] = 0;
                    enter(u);
                    stack.emplace_back(u, 0);
                    descended = true;
                    break;
                }
            }
            if (!descended) stack.pop_back();
        }
    }
    int mx = -1;
    for (int c : out.cluster_of) mx = std::max(mx, c);
    out.num_clusters = mx + 1;
    return out;
}

PooledGraph build_pooled_graph(const std::vector<int>& src, const std::vector<int>& tgt,
                               const std::vector<int>& cluster_of, int num_clusters) {
    if (src.size() != tgt.size()) throw std::invalid_argument("build_pooled_graph: src/tgt size mismatch");
    int n = (int)cluster_of.size();
    PooledGraph g;
    g.num_clusters = num_clusters;
    std::map<std::pair<int, int>, int> pair_idx;
    std::vector<std::pair<int, int>> raw(src.size());
    for (size_t e = 0; e < src.size(); ++e) {
        if (src[e] < 0 || src[e] >= n || tgt[e] < 0 || tgt[e] >= n)
            throw std::invalid_argument("build_pooled_graph: edge endpoint out of range");
        int a = cluster_of[src[e]], b = cluster_of[tgt[e]];
        if (a < 0 || a >= num_clusters || b < 0 || b >= num_clusters)
            throw std::invalid_argument("build_pooled_graph: cluster id out of range");
        raw[e] = {std::min(a, b), std::max(a, b)};
        if (a != b) pair_idx.emplace(raw[e], 0);
    }
    int k = 0;
    for (auto& [pr, idx] : pair_idx) {
        idx = k++;
        g.pairs.push_back(pr);
    }
    g.pair_count.assign(g.pairs.size(), 0);
    g.fine_edge_pair.resize(src.size());
    for (size_t e = 0; e < src.size(); ++e) {
        if (raw[e].first == raw[e].second) {
            g.fine_edge_pair[e] = -1;
        } else {
            int idx = pair_idx[raw[e]];
            g.fine_edge_pair[e] = idx;
            g.pair_count[idx]++;
        }
    }
    for (int i = 0; i < (int)g.pairs.size(); ++i) {
        g.src.push_back(g.pairs[i].first);
        g.tgt.push_back(g.pairs[i].second);
        g.dir_pair.push_back(i);
        g.src.push_back(g.pairs[i].second);
        g.tgt.push_back(g.pairs[i].first);
        g.dir_pair.push_back(i);
    }
    return g;
}

TensorT<double> pool_node_features(const TensorT<double>& x, const Clustering& c) {
    if (x.rows() != (int)c.cluster_of.size())
        throw std::invalid_argument("pool_node_features: row count != clustered node count");
    int w = x.cols();
    TensorT<double> out({c.num_clusters, w});
    std::vector<int> size(c.num_clusters, 0);
    for (int v = 0; v < x.rows(); ++v) {
        int k = c.cluster_of[v];
        size[k]++;
        for (int j = 0; j < w; ++j) out.at(k, j) += x.at(v, j);
    }
    for (int k = 0; k < c.num_clusters; ++k)
        for (int j = 0; j < w; ++j) out.at(k, j) /= size[k];
    return out;
}

TensorT<double> pool_edge_features(const TensorT<double>& e, const PooledGraph& pg) {
    if (e.rows() != (int)pg.fine_edge_pair.size())
        throw std::invalid_argument("pool_edge_features: row count != fine edge count");
    int w = e.cols();
    TensorT<double> out({(int)pg.pairs.size(), w});
    for (int r = 0; r < e.rows(); ++r) {
        int k = pg.fine_edge_pair[r];
        if (k < 0) continue;
        for (int j = 0; j < w; ++j) out.at(k, j) += e.at(r, j);
    }
    for (int k = 0; k < (int)pg.pairs.size(); ++k)
        for (int j = 0; j < w; ++j) out.at(k, j) /= pg.pair_count[k];
    return out;
}

TensorT<double> unpool_node_features(const TensorT<double>& xp, const Clustering& c) {
    if (xp.rows() != c.num_clusters)
        throw std::invalid_argument("unpool_node_features: row count != cluster count");
    int w = xp.cols();
    TensorT<double> out({(int)c.cluster_of.size(), w});
    for (int v = 0; v < out.rows(); ++v)
        for (int j = 0; j < w; ++j) out.at(v, j) = xp.at(c.cluster_of[v], j);
    return out;
}

PoolingPlan build_pooling_plan(const std::vector<std::vector<int>>& elem_adjacency,
                               const std::vector<int>& materials, const std::vector<int>& ratios) {
    PoolingPlan plan;
    std::vector<std::vector<int>> adj = elem_adjacency;
    std::vector<int> mats = materials;
    for (int p : ratios) {
        if (p < 2) throw std::invalid_argument("build_pooling_plan: ratios must be >= 2");
        PoolingStage st;
        st.clustering = dfs_cluster(adj, mats, p);
        int k = st.clustering.num_clusters;
        st.cluster_size.assign(k, 0);
        st.materials.assign(k, 0);
        for (size_t v = 0; v < mats.size(); ++v) {
            int c = st.clustering.cluster_of[v];
            st.cluster_size[c]++;
            st.materials[c] = mats[v];
        }
        st.adjacency.assign(k, {});
        for (size_t v = 0; v < adj.size(); ++v)
            for (int u : adj[v]) {
                int a = st.clustering.cluster_of[v], b = st.clustering.cluster_of[u];
                if (a != b) st.adjacency[a].push_back(b);
            }
        for (auto& nb : st.adjacency) {
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
        }
        adj = st.adjacency;
        mats = st.materials;
        plan.stages.push_back(std::move(st));
    }
    return plan;
}

int receptive_field(int m_enc, int m_gu, const std::vector<int>& ratios, int m_proc) {
    if (ratios.empty()) return m_enc + m_proc;
    long long prod = 1;
    for (int p : ratios) prod *= p;
    return (int)(m_enc + (long long)(m_gu + 1) * (prod + 1) - 2);
}

}  // namespace sgsim
