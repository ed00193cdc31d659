#include "sgsim/mesh.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little, "trajectory format is little-endian");

namespace sgsim {

using ordered_json = nlohmann::ordered_json;

TensorT<double> MeshState::centroids(const TensorT<double>& positions) const {
    int vpe = verts_per_element();
    TensorT<double> c({num_elements(), dim});
    for (int e = 0; e < num_elements(); ++e) {
        const int* ev = element(e);
        for (int k = 0; k < vpe; ++k)
            for (int d = 0; d < dim; ++d) c.at(e, d) += positions.at(ev[k], d);
        for (int d = 0; d < dim; ++d) c.at(e, d) /= vpe;
    }
    return c;
}

double MeshState::element_measure(int e, const TensorT<double>& positions) const {
    const int* ev = element(e);
    if (dim == 2) {
        double ax = positions.at(ev[1], 0) - positions.at(ev[0], 0);
        double ay = positions.at(ev[1], 1) - positions.at(ev[0], 1);
        double bx = positions.at(ev[2], 0) - positions.at(ev[0], 0);
        double by = positions.at(ev[2], 1) - positions.at(ev[0], 1);
        return 0.5 * (ax * by - ay * bx);
    }
    double m[3][3];
    for (int k = 0; k < 3; ++k)
        for (int d = 0; d < 3; ++d) m[k][d] = positions.at(ev[k + 1], d) - positions.at(ev[0], d);
    double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                 m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                 m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    return det / 6.0;
}

void MeshState::validate() const {
    if (dim != 2 && dim != 3) throw std::invalid_argument("mesh: dim must be 2 or 3");
    int nv = num_vertices(), ne = num_elements();
    int vpe = verts_per_element();
    if (rest.shape != std::vector<int>{nv, dim} || pos.shape != std::vector<int>{nv, dim})
        throw std::invalid_argument("mesh: position tensors must be [nv, dim]");
    if ((int)elements.size() != ne * vpe || (int)mu.size() != ne)
        throw std::invalid_argument("mesh: element attribute sizes disagree");
    if ((int)boundary.size() != nv || (int)vertex_body.size() != nv || (int)element_body.size() != ne)
        throw std::invalid_argument("mesh: vertex attribute sizes disagree");
    for (size_t i = 0; i < rest.size(); ++i)
        if (!std::isfinite(rest.data[i]) || !std::isfinite(pos.data[i]))
            throw std::invalid_argument("mesh: non-finite position");
    for (int i = 0; i < nv; ++i)
        if (boundary[i] != 0 && boundary[i] != 1)
            throw std::invalid_argument("mesh: boundary flag must be 0 or 1 at vertex " + std::to_string(i));
    for (int e = 0; e < ne; ++e) {
        const int* ev = element(e);
        for (int k = 0; k < vpe; ++k) {
            if (ev[k] < 0 || ev[k] >= nv)
                throw std::invalid_argument("mesh: element " + std::to_string(e) + " references vertex " +
                                            std::to_string(ev[k]));
            for (int l = k + 1; l < vpe; ++l)
                if (ev[k] == ev[l])
                    throw std::invalid_argument("mesh: element " + std::to_string(e) + " repeats a vertex");
        }
        if (lambda[e] < 0.0) throw std::invalid_argument("mesh: negative lambda at element " + std::to_string(e));
        if (mu[e] < 0.0 || (mu[e] == 0.0 && lambda[e] != 0.0))
            throw std::invalid_argument("mesh: element " + std::to_string(e) +
                                        " material must have mu > 0 or lambda == mu == 0");
        if (element_measure(e, rest) == 0.0)
            throw std::invalid_argument("mesh: element " + std::to_string(e) + " is degenerate at rest");
    }
}

MeshState Trajectory::state_at(int t) const {
    if (t < 0 || t >= num_steps()) throw std::out_of_range("trajectory: step " + std::to_string(t));
    MeshState s = base;
    s.pos = frames[t];
    return s;
}

void Trajectory::validate() const {
    base.validate();
    if (frames.empty()) throw std::invalid_argument("trajectory: no frames");
    for (const auto& f : frames) {
        if (f.shape != base.pos.shape) throw std::invalid_argument("trajectory: frame shape mismatch");
        for (double v : f.data)
            if (!std::isfinite(v)) throw std::invalid_argument("trajectory: non-finite frame");
    }
    if (frames[0].data != base.pos.data) throw std::invalid_argument("trajectory: frame 0 != base positions");
}

namespace {

constexpr char kTrajMagic[4] = {'S', 'G', 'T', 'R'};
constexpr uint32_t kTrajVersion = 1;

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::istream& is, const std::string& path) {
    uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4)) throw std::runtime_error("truncated file: " + path);
    return v;
}

}  // namespace

void save_trajectory(const Trajectory& traj, const std::string& path) {
    traj.validate();
    ordered_json h;
    h["dim"] = traj.base.dim;
    h["num_vertices"] = traj.base.num_vertices();
    h["num_elements"] = traj.base.num_elements();
    h["num_steps"] = traj.num_steps();
    h["elements"] = traj.base.elements;
    h["lambda"] = traj.base.lambda;
    h["mu"] = traj.base.mu;
    h["boundary"] = traj.base.boundary;
    h["vertex_body"] = traj.base.vertex_body;
    h["element_body"] = traj.base.element_body;
    std::vector<float> rest32(traj.base.rest.data.begin(), traj.base.rest.data.end());
    h["rest"] = rest32;
    std::string hs = h.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write(kTrajMagic, 4);
    write_u32(os, kTrajVersion);
    write_u32(os, (uint32_t)hs.size());
    os.write(hs.data(), (std::streamsize)hs.size());
    std::vector<float> buf;
    for (const auto& f : traj.frames) {
        buf.assign(f.data.begin(), f.data.end());
        os.write(reinterpret_cast<const char*>(buf.data()), (std::streamsize)(buf.size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

Trajectory load_trajectory(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kTrajMagic, 4) != 0)
        throw std::runtime_error("not a trajectory file: " + path);
    uint32_t version = read_u32(is, path);
    if (version != kTrajVersion)
        throw std::runtime_error("unsupported trajectory version " + std::to_string(version) + ": " + path);
    uint32_t hlen = read_u32(is, path);
    std::string hs(hlen, '\0');
    if (!is.read(hs.data(), hlen)) throw std::runtime_error("truncated header: " + path);
    ordered_json h = ordered_json::parse(hs, nullptr, false);
    if (h.is_discarded()) throw std::runtime_error("corrupt trajectory header: " + path);

    Trajectory traj;
    MeshState& b = traj.base;
    b.dim = h.at("dim").get<int>();
    int nv = h.at("num_vertices").get<int>();
    int ne = h.at("num_elements").get<int>();
    int steps = h.at("num_steps").get<int>();
    b.elements = h.at("elements").get<std::vector<int>>();
    b.lambda = h.at("lambda").get<std::vector<double>>();
    b.mu = h.at("mu").get<std::vector<double>>();
    b.boundary = h.at("boundary").get<std::vector<int>>();
    b.vertex_body = h.at("vertex_body").get<std::vector<int>>();
    b.element_body = h.at("element_body").get<std::vector<int>>();
    auto rest32 = h.at("rest").get<std::vector<float>>();
    if ((int)rest32.size() != nv * b.dim || ne != (int)b.mu.size())
        throw std::runtime_error("inconsistent trajectory header: " + path);
    b.rest = TensorT<double>({nv, b.dim});
    for (size_t i = 0; i < rest32.size(); ++i) b.rest.data[i] = rest32[i];

    std::vector<float> buf((size_t)nv * b.dim);
    for (int t = 0; t < steps; ++t) {
        if (!is.read(reinterpret_cast<char*>(buf.data()), (std::streamsize)(buf.size() * sizeof(float))))
            throw std::runtime_error("truncated frames: " + path);
        TensorT<double> f({nv, b.dim});
        for (size_t i = 0; i < buf.size(); ++i) f.data[i] = buf[i];
        traj.frames.push_back(std::move(f));
    }
    b.pos = traj.frames.at(0);
    traj.validate();
    return traj;
}

void DatasetManifest::validate() const {
    auto check = [&](const std::vector<int>& split, const char* name) {
        for (int i : split)
            if (i < 0 || i >= (int)files.size())
                throw std::invalid_argument(std::string("manifest: ") + name + " index out of range");
    };
    check(train, "train");
    check(valid, "valid");
    check(test, "test");
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    m.validate();
    ordered_json j;
    j["files"] = m.files;
    j["train"] = m.train;
    j["valid"] = m.valid;
    j["test"] = m.test;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open: " + path);
    ordered_json j = ordered_json::parse(is, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("corrupt manifest: " + path);
    DatasetManifest m;
    m.files = j.at("files").get<std::vector<std::string>>();
    m.train = j.at("train").get<std::vector<int>>();
    m.valid = j.at("valid").get<std::vector<int>>();
    m.test = j.at("test").get<std::vector<int>>();
    m.validate();
    return m;
}

std::string manifest_dir(const std::string& manifest_path) {
    auto p = std::filesystem::path(manifest_path).parent_path();
    return p.empty() ? std::string(".") : p.string();
}

}  // namespace sgsim
