#include "sgsim/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sgsim {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr char kMagic[4] = {'S', 'G', 'C', 'K'};
constexpr uint32_t kVersion = 1;

std::vector<Tensor> norm_tensors(const Normalizers& norms) {
    std::vector<Tensor> out;
    for (auto& [name, n] : norms.entries()) {
        (void)name;
        Tensor cnt({1});
        cnt.data[0] = (float)n->count;
        out.push_back(std::move(cnt));
        Tensor sum({n->width});
        for (int j = 0; j < n->width; ++j) sum.data[j] = (float)n->sum[j];
        out.push_back(std::move(sum));
        Tensor ssq({n->width});
        for (int j = 0; j < n->width; ++j) ssq.data[j] = (float)n->sumsq[j];
        out.push_back(std::move(ssq));
    }
    return out;
}

void norms_from_tensors(Normalizers& norms, const std::vector<Tensor>& ts) {
    size_t i = 0;
    for (auto& [name, n] : norms.entries()) {
        (void)name;
        n->count = ts[i++].data[0];
        const Tensor& sum = ts[i++];
        const Tensor& ssq = ts[i++];
        for (int j = 0; j < n->width; ++j) {
            n->sum[j] = sum.data[j];
            n->sumsq[j] = ssq.data[j];
        }
    }
}

}  // namespace

Checkpoint make_checkpoint(const ModelConfig& config, const ParamStore& params, const Normalizers& norms) {
    Checkpoint ck;
    ck.config = config;
    ck.params = params;
    ck.norms = norms;
    return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    auto infos = enumerate_params(ck.config);
    if (infos.size() != ck.params.size())
        throw std::invalid_argument("checkpoint: parameter count does not match config");
    for (size_t i = 0; i < infos.size(); ++i) {
        if (ck.params.names[i] != infos[i].name || ck.params.tensors[i].shape != infos[i].shape)
            throw std::invalid_argument("checkpoint: parameter " + ck.params.names[i] +
                                        " does not match config layout");
    }
    auto nstats = enumerate_norm_stats(ck.config);
    auto ntensors = norm_tensors(ck.norms);

    ordered_json manifest;
    manifest["config"] = config_to_json(ck.config);
    ordered_json tensors = ordered_json::array();
    for (const auto& info : infos) tensors.push_back({{"name", info.name}, {"shape", info.shape}});
    for (size_t i = 0; i < nstats.size(); ++i)
        tensors.push_back({{"name", nstats[i].name}, {"shape", nstats[i].shape}});
    manifest["tensors"] = tensors;
    manifest["has_opt"] = ck.has_opt;
    if (ck.has_opt) manifest["opt_step"] = ck.opt_step;
    std::string ms = manifest.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open for write: " + path);
    os.write(kMagic, 4);
    uint32_t v = kVersion;
    os.write(reinterpret_cast<const char*>(&v), 4);
    uint32_t mlen = (uint32_t)ms.size();
    os.write(reinterpret_cast<const char*>(&mlen), 4);
    os.write(ms.data(), (std::streamsize)ms.size());
    auto write_tensor = [&](const Tensor& t) {
        os.write(reinterpret_cast<const char*>(t.data.data()), (std::streamsize)(t.size() * sizeof(float)));
    };
    for (const auto& t : ck.params.tensors) write_tensor(t);
    for (const auto& t : ntensors) write_tensor(t);
    if (ck.has_opt) {
        if (ck.opt_m.size() != ck.params.size() || ck.opt_v.size() != ck.params.size())
            throw std::invalid_argument("checkpoint: optimizer state size mismatch");
        for (const auto& t : ck.opt_m) write_tensor(t);
        for (const auto& t : ck.opt_v) write_tensor(t);
    }
    if (!os) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open: " + path);
    char magic[4];
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint32_t version = 0, mlen = 0;
    if (!is.read(reinterpret_cast<char*>(&version), 4) || version != kVersion)
        throw std::runtime_error("unsupported checkpoint version in " + path);
    if (!is.read(reinterpret_cast<char*>(&mlen), 4)) throw std::runtime_error("truncated checkpoint: " + path);
    std::string ms(mlen, '\0');
    if (!is.read(ms.data(), mlen)) throw std::runtime_error("truncated checkpoint manifest: " + path);
    ordered_json manifest = ordered_json::parse(ms, nullptr, false);
    if (manifest.is_discarded()) throw std::runtime_error("corrupt checkpoint manifest: " + path);

    Checkpoint ck;
    ck.config = config_from_json(manifest.at("config"));
    auto infos = enumerate_params(ck.config);
    auto nstats = enumerate_norm_stats(ck.config);
    const auto& tensors = manifest.at("tensors");
    if (tensors.size() != infos.size() + nstats.size())
        throw std::runtime_error("checkpoint " + path + ": tensor table has " +
                                 std::to_string(tensors.size()) + " entries, config requires " +
                                 std::to_string(infos.size() + nstats.size()));
    auto expect = [&](size_t i, const ParamInfo& info) {
        const auto& e = tensors.at(i);
        std::string name = e.at("name").get<std::string>();
        auto shape = e.at("shape").get<std::vector<int>>();
        if (name != info.name || shape != info.shape)
            throw std::runtime_error("checkpoint " + path + ": tensor " + std::to_string(i) + " is " + name +
                                     shape_str(shape) + ", config requires " + info.name + shape_str(info.shape));
    };
    for (size_t i = 0; i < infos.size(); ++i) expect(i, infos[i]);
    for (size_t i = 0; i < nstats.size(); ++i) expect(infos.size() + i, nstats[i]);

    auto read_tensor = [&](const std::vector<int>& shape) {
        Tensor t(shape);
        if (!is.read(reinterpret_cast<char*>(t.data.data()), (std::streamsize)(t.size() * sizeof(float))))
            throw std::runtime_error("truncated checkpoint data: " + path);
        return t;
    };
    for (const auto& info : infos) ck.params.add(info.name, read_tensor(info.shape));
    std::vector<Tensor> nts;
    for (const auto& info : nstats) nts.push_back(read_tensor(info.shape));
    ck.norms = Normalizers::make(ck.config);
    norms_from_tensors(ck.norms, nts);
    ck.has_opt = manifest.value("has_opt", false);
    if (ck.has_opt) {
        ck.opt_step = manifest.at("opt_step").get<long long>();
        for (const auto& info : infos) ck.opt_m.push_back(read_tensor(info.shape));
        for (const auto& info : infos) ck.opt_v.push_back(read_tensor(info.shape));
    }
    return ck;
}

}  // namespace sgsim
