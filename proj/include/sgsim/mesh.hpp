#pragma once

#include <string>
#include <vector>

#include "sgsim/tensor.hpp"

namespace sgsim {

/// One snapshot of a simplicial mesh: rest and current vertex positions plus
/// static per-vertex / per-element attributes. dim=2 means triangles, dim=3
/// tetrahedra. boundary[i]==1 marks a kinematically prescribed vertex.
struct MeshState {
    int dim = 2;
    TensorT<double> rest;  // [nv, dim]
    TensorT<double> pos;   // [nv, dim]
    std::vector<int> elements;  // flat, num_elements x (dim+1)
    std::vector<double> lambda, mu;  // per element; both zero = unknown material
    std::vector<int> boundary;       // per vertex, 0/1
    std::vector<int> vertex_body, element_body;

    int verts_per_element() const { return dim + 1; }
    int num_vertices() const { return rest.rows(); }
    int num_elements() const { return (int)lambda.size(); }
    const int* element(int e) const { return &elements[(size_t)e * verts_per_element()]; }

    /// Centroids of all elements under the given positions, [ne, dim].
    TensorT<double> centroids(const TensorT<double>& positions) const;

    /// Signed measure of element e (area for dim=2, volume for dim=3) under
    /// the given positions.
    double element_measure(int e, const TensorT<double>& positions) const;

    void validate() const;  // throws std::invalid_argument on any broken invariant
};

/// A quasi-static trajectory: shared static data plus per-step vertex
/// positions. frames[0] matches base.pos.
struct Trajectory {
    MeshState base;
    std::vector<TensorT<double>> frames;

    int num_steps() const { return (int)frames.size(); }
    MeshState state_at(int t) const;
    void validate() const;
};

void save_trajectory(const Trajectory& traj, const std::string& path);
Trajectory load_trajectory(const std::string& path);

/// Index of trajectory files plus the train/valid/test split, stored as JSON.
/// File paths are relative to the manifest's directory.
struct DatasetManifest {
    std::vector<std::string> files;
    std::vector<int> train, valid, test;
    void validate() const;
};

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

/// Resolve a manifest-relative trajectory path against the manifest location.
std::string manifest_dir(const std::string& manifest_path);

}  // namespace sgsim
