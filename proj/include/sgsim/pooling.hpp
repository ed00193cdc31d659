#pragma once

#include <utility>
#include <vector>

#include "sgsim/tensor.hpp"

namespace sgsim {

struct Clustering {
    std::vector<int> cluster_of;  // per node
    int num_clusters = 0;
};

/// Material-aware DFS clustering. Walks nodes in ascending id order, visits
/// same-material unvisited neighbors depth-first, and starts a new cluster
/// every p visits or when a new root finds the current cluster non-empty.
/// Every cluster ends up with 1..p nodes of a single material, all inside one
/// connected same-material region.
Clustering dfs_cluster(const std::vector<std::vector<int>>& adjacency, const std::vector<int>& materials,
                       int p);

/// Coarse graph induced by a clustering over a directed edge list. Distinct
/// cross-cluster pairs become undirected coarse edges (sorted); each keeps
/// the count of fine directed edges that collapsed into it so features can be
/// mean-pooled. src/tgt expand every pair into the two directed coarse edges.
struct PooledGraph {
    int num_clusters = 0;
    std::vector<std::pair<int, int>> pairs;
    std::vector<int> fine_edge_pair;  // per fine directed edge: pair index or -1 (intra-cluster)
    std::vector<int> pair_count;
    std::vector<int> src, tgt;
    std::vector<int> dir_pair;  // per directed coarse edge: its pair index
};

PooledGraph build_pooled_graph(const std::vector<int>& src, const std::vector<int>& tgt,
                               const std::vector<int>& cluster_of, int num_clusters);

/// Even pooling: each coarse node averages its members' rows, [K, w].
TensorT<double> pool_node_features(const TensorT<double>& x, const Clustering& c);

/// Each coarse pair averages the fine directed edges that collapsed into it,
/// [num pairs, w]. Rows of e follow the edge list the graph was built from.
TensorT<double> pool_edge_features(const TensorT<double>& e, const PooledGraph& pg);

/// Broadcast each coarse row back onto the cluster members, [n, w].
TensorT<double> unpool_node_features(const TensorT<double>& xp, const Clustering& c);

/// Static per-topology pooling schedule. Stage s clusters the level-s element
/// graph; mesh adjacency (never world edges) drives the clustering, and the
/// coarsened mesh adjacency feeds the next stage.
struct PoolingStage {
    Clustering clustering;
    std::vector<int> cluster_size;
    std::vector<int> materials;             // per coarse node
    std::vector<std::vector<int>> adjacency;  // coarse mesh adjacency
};

struct PoolingPlan {
    std::vector<PoolingStage> stages;
};

PoolingPlan build_pooling_plan(const std::vector<std::vector<int>>& elem_adjacency,
                               const std::vector<int>& materials, const std::vector<int>& ratios);

/// Hop radius a single output can see: m_enc + (m_gu+1)(prod(ratios)+1) - 2
/// for the staged model, m_enc + m_proc for the flat baseline.
int receptive_field(int m_enc, int m_gu, const std::vector<int>& ratios, int m_proc);

}  // namespace sgsim
