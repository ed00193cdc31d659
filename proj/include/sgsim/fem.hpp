#pragma once

#include <array>

#include "sgsim/mesh.hpp"
#include "sgsim/rng.hpp"

namespace sgsim {
namespace fem {

/// 6x6 plane-strain stiffness of one linear triangle, dof order
/// (u0x, u0y, u1x, u1y, u2x, u2y). Vertices must be counter-clockwise;
/// degenerate or inverted triangles are rejected. The matrix is exactly
/// symmetric: the lower triangle is mirrored from the upper.
TensorT<double> element_stiffness(const double* x0, const double* x1, const double* x2, double lambda,
                                  double mu);

/// One prescribed displacement component: vertex, axis (0=x, 1=y), value
/// relative to the rest position.
struct DofConstraint {
    int vertex = 0;
    int axis = 0;
    double value = 0.0;
};

/// Static equilibrium of the deformable part (elements with mu > 0) under
/// prescribed displacements, from the rest configuration. Returns the full
/// displacement vector [2*nv]. Every vertex not attached to a deformable
/// element must be constrained on both axes.
std::vector<double> solve_displacements(const MeshState& state, const std::vector<DofConstraint>& constraints);

/// Dense global stiffness over the deformable (mu > 0) elements, [2nv, 2nv],
/// assembled from the same per-element matrices the solver uses. Exactly
/// symmetric; rigid translations lie in its null space.
TensorT<double> assemble_stiffness(const MeshState& state);

/// Rectangular plate (body 0, fixed bottom row) plus a rigid disc indenter
/// (body 1, zero-material convention) hovering above it. The indenter mesh is
/// a triangle fan; its first vertex is the disc center.
struct PlateScenario {
    double width = 1.0, height = 0.5;
    int nx = 7, ny = 4;  // vertex grid
    double lambda = 1.0, mu = 0.5;
    double radius = 0.15;
    int segments = 8;
    double x_start = 0.5;   // indenter center x at step 0
    double drift = 0.0;     // total lateral travel of the center
    double depth = 0.08;    // lowest surface point ends this far below the plate top
    double clearance = 0.02;
    int steps = 24;
};

MeshState build_plate_scene(const PlateScenario& sc);

/// Indenter center at each step: straight-line descent (plus drift) from the
/// starting hover position to the final depth.
std::vector<std::array<double, 2>> indenter_centers(const PlateScenario& sc);

struct StepResult {
    TensorT<double> pos;
    std::vector<int> prescribed;  // vertices with a prescribed displacement this step
};

/// Advance one quasi-static step: move the rigid body so its center lands on
/// center_next, project penetrating plate vertices onto the disc surface,
/// fix supported vertices, solve for the rest.
StepResult solve_step(const MeshState& state, const std::array<double, 2>& center_next, double radius);

/// Run a full scenario. Frame 0 is the untouched scene; each later frame is
/// one solve_step. Throws if any element inverts along the way.
Trajectory generate_trajectory(const PlateScenario& sc);

/// Varied plate aspect, indenter size, approach point and drift.
PlateScenario random_scenario_broad(Rng& rng);

/// Fixed plate aspect; indenter radii drawn from a band the broad family
/// rarely visits. Used as the transfer target task.
PlateScenario random_scenario_shifted(Rng& rng);

/// Simulate all scenarios, write trajectory files plus a manifest with a
/// roughly 10:1:1 train/valid/test split. Returns the manifest path.
std::string generate_dataset(const std::vector<PlateScenario>& scenarios, const std::string& out_dir,
                             const std::string& name);

}  // namespace fem
}  // namespace sgsim
