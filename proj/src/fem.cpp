#include "sgsim/fem.hpp"

#include <cmath>
#include <filesystem>
#include <map>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

namespace sgsim {
namespace fem {

TensorT<double> element_stiffness(const double* x0, const double* x1, const double* x2, double lambda,
                                  double mu) {
    double area2 = (x1[0] - x0[0]) * (x2[1] - x0[1]) - (x1[1] - x0[1]) * (x2[0] - x0[0]);
    if (area2 <= 0.0) throw std::invalid_argument("element_stiffness: triangle is degenerate or inverted");
    double area = 0.5 * area2;

    // Shape function gradients: b_i = dN_i/dx * 2A, c_i = dN_i/dy * 2A.
    double b[3] = {x1[1] - x2[1], x2[1] - x0[1], x0[1] - x1[1]};
    double c[3] = {x2[0] - x1[0], x0[0] - x2[0], x1[0] - x0[0]};
    double B[3][6] = {};
    for (int i = 0; i < 3; ++i) {
        B[0][2 * i] = b[i];
        B[1][2 * i + 1] = c[i];
        B[2][2 * i] = c[i];
        B[2][2 * i + 1] = b[i];
    }
    for (auto& row : B)
        for (auto& v : row) v /= area2;

    double D[3][3] = {{lambda + 2 * mu, lambda, 0}, {lambda, lambda + 2 * mu, 0}, {0, 0, mu}};

    TensorT<double> K({6, 6});
    for (int i = 0; i < 6; ++i)
        for (int j = i; j < 6; ++j) {
            double acc = 0.0;
            for (int r = 0; r < 3; ++r)
                for (int s = 0; s < 3; ++s) acc += B[r][i] * D[r][s] * B[s][j];
            K.at(i, j) = acc * area;
            K.at(j, i) = K.at(i, j);
        }
    return K;
}

std::vector<double> solve_displacements(const MeshState& state, const std::vector<DofConstraint>& constraints) {
    if (state.dim != 2) throw std::invalid_argument("solve_displacements: only 2-d meshes are supported");
    int nv = state.num_vertices();
    int ndof = 2 * nv;

    std::vector<char> constrained(ndof, 0);
    std::vector<double> value(ndof, 0.0);
    for (const auto& c : constraints) {
        if (c.vertex < 0 || c.vertex >= nv || c.axis < 0 || c.axis > 1)
            throw std::invalid_argument("solve_displacements: constraint out of range");
        int d = 2 * c.vertex + c.axis;
        if (constrained[d] && value[d] != c.value)
            throw std::invalid_argument("solve_displacements: conflicting constraints on one dof");
        constrained[d] = 1;
        value[d] = c.value;
    }

    std::vector<char> deformable(nv, 0);
    std::vector<Eigen::Triplet<double>> trips;
    for (int e = 0; e < state.num_elements(); ++e) {
        if (state.mu[e] <= 0.0) continue;
        const int* ev = state.element(e);
        for (int k = 0; k < 3; ++k) deformable[ev[k]] = 1;
        TensorT<double> Ke = element_stiffness(&state.rest.at(ev[0], 0), &state.rest.at(ev[1], 0),
                                               &state.rest.at(ev[2], 0), state.lambda[e], state.mu[e]);
        int dof[6] = {2 * ev[0], 2 * ev[0] + 1, 2 * ev[1], 2 * ev[1] + 1, 2 * ev[2], 2 * ev[2] + 1};
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) trips.emplace_back(dof[i], dof[j], Ke.at(i, j));
    }
    for (int v = 0; v < nv; ++v)
        if (!deformable[v] && (!constrained[2 * v] || !constrained[2 * v + 1]))
            throw std::invalid_argument("solve_displacements: vertex " + std::to_string(v) +
                                        " has no stiffness and is not fully constrained");

    std::vector<int> free_id(ndof, -1);
    int nfree = 0;
    for (int d = 0; d < ndof; ++d)
        if (!constrained[d]) free_id[d] = nfree++;

    std::vector<double> u(value);
    if (nfree > 0) {
        Eigen::SparseMatrix<double> Kff(nfree, nfree);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nfree);
        std::vector<Eigen::Triplet<double>> ff;
        for (const auto& t : trips) {
            int r = free_id[t.row()], c = free_id[t.col()];
            if (r >= 0 && c >= 0)
                ff.emplace_back(r, c, t.value());
            else if (r >= 0)
                rhs[r] -= t.value() * value[t.col()];
        }
        Kff.setFromTriplets(ff.begin(), ff.end());
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(Kff);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("solve_displacements: stiffness factorization failed");
        Eigen::VectorXd uf = solver.solve(rhs);
        if (solver.info() != Eigen::Success)
            throw std::runtime_error("solve_displacements: linear solve failed");
        for (int d = 0; d < ndof; ++d)
            if (free_id[d] >= 0) u[d] = uf[free_id[d]];
    }
    return u;
}

TensorT<double> assemble_stiffness(const MeshState& state) {
    if (state.dim != 2) throw std::invalid_argument("assemble_stiffness: only 2-d meshes are supported");
    int ndof = 2 * state.num_vertices();
    TensorT<double> K({ndof, ndof});
    for (int e = 0; e < state.num_elements(); ++e) {
        if (state.mu[e] <= 0.0) continue;
        const int* ev = state.element(e);
        TensorT<double> Ke = element_stiffness(&state.rest.at(ev[0], 0), &state.rest.at(ev[1], 0),
                                               &state.rest.at(ev[2], 0), state.lambda[e], state.mu[e]);
        int dof[6] = {2 * ev[0], 2 * ev[0] + 1, 2 * ev[1], 2 * ev[1] + 1, 2 * ev[2], 2 * ev[2] + 1};
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) K.at(dof[i], dof[j]) += Ke.at(i, j);
    }
    return K;
}

namespace {

/// Trajectories are stored as 32-bit floats; rounding at generation time
/// keeps the in-memory states identical to what a reader gets back.
void quantize_f32(TensorT<double>& t) {
    for (auto& v : t.data) v = (double)(float)v;
}

}  // namespace

MeshState build_plate_scene(const PlateScenario& sc) {
    if (sc.nx < 2 || sc.ny < 2 || sc.segments < 3)
        throw std::invalid_argument("plate scene: grid needs nx,ny >= 2 and >= 3 indenter segments");
    MeshState m;
    m.dim = 2;
    int nv_plate = sc.nx * sc.ny;
    int nv = nv_plate + sc.segments + 1;
    m.rest = TensorT<double>({nv, 2});
    for (int j = 0; j < sc.ny; ++j)
        for (int i = 0; i < sc.nx; ++i) {
            int v = j * sc.nx + i;
            m.rest.at(v, 0) = sc.width * i / (sc.nx - 1);
            m.rest.at(v, 1) = sc.height * j / (sc.ny - 1);
        }
    double cy = sc.height + sc.radius + sc.clearance;
    int center = nv_plate;
    m.rest.at(center, 0) = sc.x_start;
    m.rest.at(center, 1) = cy;
    for (int k = 0; k < sc.segments; ++k) {
        double th = 2.0 * M_PI * k / sc.segments;
        m.rest.at(center + 1 + k, 0) = sc.x_start + sc.radius * std::cos(th);
        m.rest.at(center + 1 + k, 1) = cy + sc.radius * std::sin(th);
    }

    for (int j = 0; j + 1 < sc.ny; ++j)
        for (int i = 0; i + 1 < sc.nx; ++i) {
            int v00 = j * sc.nx + i, v10 = v00 + 1, v01 = v00 + sc.nx, v11 = v01 + 1;
            m.elements.insert(m.elements.end(), {v00, v10, v11});
            m.elements.insert(m.elements.end(), {v00, v11, v01});
        }
    int ne_plate = (int)m.elements.size() / 3;
    for (int k = 0; k < sc.segments; ++k) {
        int a = center + 1 + k, b = center + 1 + (k + 1) % sc.segments;
        m.elements.insert(m.elements.end(), {center, a, b});
    }
    int ne = (int)m.elements.size() / 3;
    m.lambda.assign(ne, 0.0);
    m.mu.assign(ne, 0.0);
    m.element_body.assign(ne, 1);
    for (int e = 0; e < ne_plate; ++e) {
        m.lambda[e] = sc.lambda;
        m.mu[e] = sc.mu;
        m.element_body[e] = 0;
    }
    m.vertex_body.assign(nv, 1);
    for (int v = 0; v < nv_plate; ++v) m.vertex_body[v] = 0;
    m.boundary.assign(nv, 1);  // indenter is kinematic throughout
    for (int v = 0; v < nv_plate; ++v) m.boundary[v] = (v < sc.nx) ? 1 : 0;  // support = bottom row
    quantize_f32(m.rest);
    m.pos = m.rest;
    m.validate();
    return m;
}

std::vector<std::array<double, 2>> indenter_centers(const PlateScenario& sc) {
    if (sc.steps < 2) throw std::invalid_argument("plate scene: need at least 2 steps");
    std::vector<std::array<double, 2>> c(sc.steps);
    double y0 = sc.height + sc.radius + sc.clearance;
    double y1 = sc.height + sc.radius - sc.depth;
    for (int t = 0; t < sc.steps; ++t) {
        double a = (double)t / (sc.steps - 1);
        c[t] = {sc.x_start + a * sc.drift, y0 + a * (y1 - y0)};
    }
    return c;
}

StepResult solve_step(const MeshState& state, const std::array<double, 2>& center_next, double radius) {
    if (radius <= 0.0) throw std::invalid_argument("solve_step: radius must be positive");
    int nv = state.num_vertices();
    int center_vertex = -1;
    for (int v = 0; v < nv; ++v)
        if (state.vertex_body[v] != 0) {
            center_vertex = v;
            break;
        }
    if (center_vertex < 0) throw std::invalid_argument("solve_step: no rigid body in scene");
    double dx = center_next[0] - state.pos.at(center_vertex, 0);
    double dy = center_next[1] - state.pos.at(center_vertex, 1);

    std::vector<DofConstraint> cons;
    StepResult out;
    out.prescribed.assign(nv, 0);
    for (int v = 0; v < nv; ++v) {
        if (state.vertex_body[v] != 0) {
            // Rigid body: translate, constrain to its (moving) rest offset.
            double tx = state.pos.at(v, 0) + dx, ty = state.pos.at(v, 1) + dy;
            cons.push_back({v, 0, tx - state.rest.at(v, 0)});
            cons.push_back({v, 1, ty - state.rest.at(v, 1)});
            out.prescribed[v] = 1;
            continue;
        }
        if (state.boundary[v] == 1) {
            cons.push_back({v, 0, 0.0});
            cons.push_back({v, 1, 0.0});
            out.prescribed[v] = 1;
            continue;
        }
        double px = state.pos.at(v, 0) - center_next[0];
        double py = state.pos.at(v, 1) - center_next[1];
        double dist = std::sqrt(px * px + py * py);
        if (dist < radius) {
            double nx_ = dist > 0.0 ? px / dist : 0.0;
            double ny_ = dist > 0.0 ? py / dist : 1.0;
            double tx = center_next[0] + radius * nx_, ty = center_next[1] + radius * ny_;
            cons.push_back({v, 0, tx - state.rest.at(v, 0)});
            cons.push_back({v, 1, ty - state.rest.at(v, 1)});
            out.prescribed[v] = 1;
        }
    }
    std::vector<double> u = solve_displacements(state, cons);
    out.pos = state.rest;
    for (int v = 0; v < nv; ++v) {
        out.pos.at(v, 0) += u[2 * v];
        out.pos.at(v, 1) += u[2 * v + 1];
    }
    return out;
}

Trajectory generate_trajectory(const PlateScenario& sc) {
    Trajectory traj;
    traj.base = build_plate_scene(sc);
    auto centers = indenter_centers(sc);
    traj.frames.push_back(traj.base.pos);
    MeshState cur = traj.base;
    for (int t = 1; t < sc.steps; ++t) {
        StepResult r = solve_step(cur, centers[t], sc.radius);
        quantize_f32(r.pos);
        cur.pos = r.pos;
        for (int e = 0; e < cur.num_elements(); ++e)
            if (cur.mu[e] > 0.0 && cur.element_measure(e, cur.pos) <= 0.0)
                throw std::runtime_error("generate_trajectory: element " + std::to_string(e) +
                                         " inverted at step " + std::to_string(t));
        traj.frames.push_back(cur.pos);
    }
    traj.validate();
    return traj;
}

PlateScenario random_scenario_broad(Rng& rng) {
    PlateScenario sc;
    sc.width = rng.uniform(0.8, 1.4);
    sc.height = rng.uniform(0.4, 0.6);
    sc.lambda = 1.0;
    sc.mu = 0.5;
    sc.radius = rng.uniform(0.10, 0.16);
    sc.x_start = rng.uniform(0.3, 0.7) * sc.width;
    sc.drift = rng.uniform(-0.15, 0.15) * sc.width;
    sc.depth = rng.uniform(0.05, 0.10) * sc.height / 0.5;
    return sc;
}

PlateScenario random_scenario_shifted(Rng& rng) {
    PlateScenario sc;
    sc.width = 1.0;
    sc.height = 0.5;
    sc.lambda = 1.0;
    sc.mu = 0.5;
    sc.radius = rng.uniform(0.19, 0.24);
    sc.x_start = rng.uniform(0.4, 0.6) * sc.width;
    sc.drift = 0.0;
    sc.depth = rng.uniform(0.05, 0.09);
    return sc;
}

std::string generate_dataset(const std::vector<PlateScenario>& scenarios, const std::string& out_dir,
                             const std::string& name) {
    if (scenarios.empty()) throw std::invalid_argument("generate_dataset: no scenarios");
    std::filesystem::create_directories(out_dir);
    DatasetManifest man;
    for (size_t i = 0; i < scenarios.size(); ++i) {
        Trajectory traj = generate_trajectory(scenarios[i]);
        std::string fname = name + "_" + std::to_string(i) + ".sgtr";
        save_trajectory(traj, out_dir + "/" + fname);
        man.files.push_back(fname);
    }
    int n = (int)man.files.size();
    if (n == 1) {
        man.train = man.valid = man.test = {0};
    } else if (n == 2) {
        man.train = {0};
        man.valid = man.test = {1};
    } else {
        int held = std::max(1, (int)std::llround(n / 12.0));
        for (int i = 0; i < n - 2 * held; ++i) man.train.push_back(i);
        for (int i = n - 2 * held; i < n - held; ++i) man.valid.push_back(i);
        for (int i = n - held; i < n; ++i) man.test.push_back(i);
    }
    std::string mpath = out_dir + "/" + name + ".json";
    save_manifest(man, mpath);
    return mpath;
}

}  // namespace fem
}  // namespace sgsim
