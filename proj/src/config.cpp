#include "sgsim/config.hpp"

#include <fstream>
#include <stdexcept>

namespace sgsim {

void ModelConfig::validate() const {
    if (dim != 2 && dim != 3) throw std::invalid_argument("config: dim must be 2 or 3");
    if (latent < 1) throw std::invalid_argument("config: latent must be >= 1");
    if (m_enc < 0 || m_gu < 0 || m_proc < 0) throw std::invalid_argument("config: block counts must be >= 0");
    for (int p : pooling_ratios)
        if (p < 2) throw std::invalid_argument("config: pooling ratios must be >= 2");
    if (noise_std < 0.0) throw std::invalid_argument("config: noise_std must be >= 0");
    if (world_radius < 0.0) throw std::invalid_argument("config: world_radius must be >= 0");
}

nlohmann::ordered_json config_to_json(const ModelConfig& c) {
    nlohmann::ordered_json j;
    j["dim"] = c.dim;
    j["latent"] = c.latent;
    j["m_enc"] = c.m_enc;
    j["m_gu"] = c.m_gu;
    j["pooling_ratios"] = c.pooling_ratios;
    j["m_proc"] = c.m_proc;
    j["noise_std"] = c.noise_std;
    j["world_radius"] = c.world_radius;
    return j;
}

ModelConfig config_from_json(const nlohmann::ordered_json& j) {
    ModelConfig c;
    c.dim = j.at("dim").get<int>();
    c.latent = j.at("latent").get<int>();
    c.m_enc = j.at("m_enc").get<int>();
    c.m_gu = j.at("m_gu").get<int>();
    c.pooling_ratios = j.at("pooling_ratios").get<std::vector<int>>();
    c.m_proc = j.at("m_proc").get<int>();
    c.noise_std = j.at("noise_std").get<double>();
    c.world_radius = j.at("world_radius").get<double>();
    c.validate();
    return c;
}

ModelConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config: " + path);
    auto j = nlohmann::ordered_json::parse(is, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("corrupt config json: " + path);
    return config_from_json(j);
}

}  // namespace sgsim
