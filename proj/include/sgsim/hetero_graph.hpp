#pragma once

#include "sgsim/mesh.hpp"
#include "sgsim/tensor.hpp"

namespace sgsim {

/// One directed edge family. Feature rows follow src/tgt ordering and carry
/// [rest offset, |rest offset|, current offset, |current offset|] per edge,
/// offsets taken source minus target.
struct EdgeSet {
    std::vector<int> src, tgt;
    TensorT<double> feat;  // [n_edges, 2*dim + 2]
    int count() const { return (int)src.size(); }
};

/// Two-family graph over a mesh snapshot: mesh-vertex nodes and element
/// nodes, with vertex-vertex, element-element, vertex-element and
/// element-vertex edge sets. Element-element edges list mesh-adjacency pairs
/// first and cross-body proximity ("world") edges after; ee_is_world marks
/// the latter.
struct HeteroGraph {
    int dim = 2;
    int num_mesh = 0, num_elem = 0;
    TensorT<double> xm;  // [nm, 1 + dim]: boundary flag, displacement
    TensorT<double> xe;  // [ne, 2 + dim]: lambda, mu, centroid displacement
    EdgeSet mm, ee, me, em;
    std::vector<char> ee_is_world;
};

/// Build the graph for one state. World edges connect element pairs of
/// different bodies whose current centroids are strictly closer than
/// world_radius. The state is validated first; degenerate meshes are
/// rejected.
HeteroGraph build_hetero_graph(const MeshState& state, double world_radius);

/// Element mesh-adjacency (shared (dim-1)-face neighbors, no world edges),
/// as sorted neighbor lists. This is the adjacency clustering runs on.
std::vector<std::vector<int>> element_mesh_adjacency(const MeshState& state);

/// Dense material index per element: distinct (body, lambda, mu) triples
/// numbered by first occurrence.
std::vector<int> element_materials(const MeshState& state);

}  // namespace sgsim
