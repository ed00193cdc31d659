#include "sgsim/hetero_graph.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace sgsim {

namespace {

/// Fill one feature row for an edge from src to tgt under both coordinate sets.
void edge_feature_row(TensorT<double>& feat, int row, int dim, const TensorT<double>& rest,
                      const TensorT<double>& pos, int src_row_rest, int tgt_row_rest, int src_row_pos,
                      int tgt_row_pos) {
    double* out = &feat.data[(size_t)row * (2 * dim + 2)];
    double n0 = 0.0, n1 = 0.0;
    for (int d = 0; d < dim; ++d) {
        double r = rest.at(src_row_rest, d) - rest.at(tgt_row_rest, d);
        out[d] = r;
        n0 += r * r;
    }
    out[dim] = std::sqrt(n0);
    for (int d = 0; d < dim; ++d) {
        double c = pos.at(src_row_pos, d) - pos.at(tgt_row_pos, d);
        out[dim + 1 + d] = c;
        n1 += c * c;
    }
    out[2 * dim + 1] = std::sqrt(n1);
}

}  // namespace

std::vector<std::vector<int>> element_mesh_adjacency(const MeshState& state) {
    int ne = state.num_elements();
    int vpe = state.verts_per_element();
    // A face is an element's (dim)-vertex subset; two elements sharing one
    // are neighbors.
    std::map<std::vector<int>, std::vector<int>> face_elems;
    std::vector<int> face;
    for (int e = 0; e < ne; ++e) {
        const int* ev = state.element(e);
        for (int drop = 0; drop < vpe; ++drop) {
            face.clear();
            for (int k = 0; k < vpe; ++k)
                if (k != drop) face.push_back(ev[k]);
            std::sort(face.begin(), face.end());
            face_elems[face].push_back(e);
        }
    }
    std::vector<std::vector<int>> adj(ne);
    for (const auto& [f, elems] : face_elems)
        for (size_t a = 0; a < elems.size(); ++a)
            for (size_t b = a + 1; b < elems.size(); ++b) {
                adj[elems[a]].push_back(elems[b]);
                adj[elems[b]].push_back(elems[a]);
            }
    for (auto& nb : adj) {
        std::sort(nb.begin(), nb.end());
        nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    return adj;
}

std::vector<int> element_materials(const MeshState& state) {
    std::vector<int> mat(state.num_elements());
    std::map<std::tuple<int, double, double>, int> seen;
    for (int e = 0; e < state.num_elements(); ++e) {
        auto key = std::make_tuple(state.element_body[e], state.lambda[e], state.mu[e]);
        auto it = seen.find(key);
        if (it == seen.end()) it = seen.emplace(key, (int)seen.size()).first;
        mat[e] = it->second;
    }
    return mat;
}

HeteroGraph build_hetero_graph(const MeshState& state, double world_radius) {
    state.validate();
    if (world_radius < 0.0) throw std::invalid_argument("world_radius must be >= 0");

    HeteroGraph g;
    g.dim = state.dim;
    g.num_mesh = state.num_vertices();
    g.num_elem = state.num_elements();
    int dim = state.dim;
    int vpe = state.verts_per_element();
    int ew = 2 * dim + 2;

    // Node features.
    g.xm = TensorT<double>({g.num_mesh, 1 + dim});
    for (int i = 0; i < g.num_mesh; ++i) {
        g.xm.at(i, 0) = state.boundary[i];
        for (int d = 0; d < dim; ++d) g.xm.at(i, 1 + d) = state.pos.at(i, d) - state.rest.at(i, d);
    }
    TensorT<double> cen_rest = state.centroids(state.rest);
    TensorT<double> cen_pos = state.centroids(state.pos);
    g.xe = TensorT<double>({g.num_elem, 2 + dim});
    for (int e = 0; e < g.num_elem; ++e) {
        g.xe.at(e, 0) = state.lambda[e];
        g.xe.at(e, 1) = state.mu[e];
        for (int d = 0; d < dim; ++d) g.xe.at(e, 2 + d) = cen_pos.at(e, d) - cen_rest.at(e, d);
    }

    // Vertex-vertex edges: element edges, deduplicated, both directions.
    std::vector<std::pair<int, int>> vpairs;
    for (int e = 0; e < g.num_elem; ++e) {
        const int* ev = state.element(e);
        for (int a = 0; a < vpe; ++a)
            for (int b = a + 1; b < vpe; ++b)
                vpairs.emplace_back(std::min(ev[a], ev[b]), std::max(ev[a], ev[b]));
    }
    std::sort(vpairs.begin(), vpairs.end());
    vpairs.erase(std::unique(vpairs.begin(), vpairs.end()), vpairs.end());
    g.mm.feat = TensorT<double>({(int)vpairs.size() * 2, ew});
    for (const auto& [a, b] : vpairs) {
        int row = g.mm.count();
        g.mm.src.push_back(a);
        g.mm.tgt.push_back(b);
        edge_feature_row(g.mm.feat, row, dim, state.rest, state.pos, a, b, a, b);
        g.mm.src.push_back(b);
        g.mm.tgt.push_back(a);
        edge_feature_row(g.mm.feat, row + 1, dim, state.rest, state.pos, b, a, b, a);
    }

    // Element-element edges: mesh adjacency first, then world edges.
    auto adj = element_mesh_adjacency(state);
    std::vector<std::pair<int, int>> epairs;
    for (int e = 0; e < g.num_elem; ++e)
        for (int nb : adj[e])
            if (e < nb) epairs.emplace_back(e, nb);
    std::sort(epairs.begin(), epairs.end());
    size_t num_mesh_pairs = epairs.size();
    for (int i = 0; i < g.num_elem; ++i)
        for (int j = i + 1; j < g.num_elem; ++j) {
            if (state.element_body[i] == state.element_body[j]) continue;
            double d2 = 0.0;
            for (int d = 0; d < dim; ++d) {
                double dd = cen_pos.at(i, d) - cen_pos.at(j, d);
                d2 += dd * dd;
            }
            if (std::sqrt(d2) < world_radius) epairs.emplace_back(i, j);
        }
    g.ee.feat = TensorT<double>({(int)epairs.size() * 2, ew});
    for (size_t k = 0; k < epairs.size(); ++k) {
        auto [a, b] = epairs[k];
        int row = g.ee.count();
        g.ee.src.push_back(a);
        g.ee.tgt.push_back(b);
        edge_feature_row(g.ee.feat, row, dim, cen_rest, cen_pos, a, b, a, b);
        g.ee.src.push_back(b);
        g.ee.tgt.push_back(a);
        edge_feature_row(g.ee.feat, row + 1, dim, cen_rest, cen_pos, b, a, b, a);
        bool world = k >= num_mesh_pairs;
        g.ee_is_world.push_back(world);
        g.ee_is_world.push_back(world);
    }

    // Vertex-element and element-vertex edges, one per element corner.
    g.me.feat = TensorT<double>({g.num_elem * vpe, ew});
    g.em.feat = TensorT<double>({g.num_elem * vpe, ew});
    for (int e = 0; e < g.num_elem; ++e) {
        const int* ev = state.element(e);
        for (int k = 0; k < vpe; ++k) {
            int row = g.me.count();
            g.me.src.push_back(ev[k]);
            g.me.tgt.push_back(e);
            // Offsets mix vertex positions with element centroids, so index
            // the two coordinate tables separately.
            double* out = &g.me.feat.data[(size_t)row * ew];
            double n0 = 0.0, n1 = 0.0;
            for (int d = 0; d < dim; ++d) {
                double r = state.rest.at(ev[k], d) - cen_rest.at(e, d);
                out[d] = r;
                n0 += r * r;
            }
            out[dim] = std::sqrt(n0);
            for (int d = 0; d < dim; ++d) {
                double c = state.pos.at(ev[k], d) - cen_pos.at(e, d);
                out[dim + 1 + d] = c;
                n1 += c * c;
            }
            out[2 * dim + 1] = std::sqrt(n1);

            g.em.src.push_back(e);
            g.em.tgt.push_back(ev[k]);
            double* out2 = &g.em.feat.data[(size_t)row * ew];
            for (int d = 0; d < dim; ++d) out2[d] = -out[d];
            out2[dim] = out[dim];
            for (int d = 0; d < dim; ++d) out2[dim + 1 + d] = -out[dim + 1 + d];
            out2[2 * dim + 1] = out[2 * dim + 1];
        }
    }
    return g;
}

}  // namespace sgsim
