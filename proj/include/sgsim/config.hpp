#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sgsim {

/// Architecture hyperparameters. Empty pooling_ratios selects the flat
/// baseline with m_proc processor blocks instead of the staged U-net.
struct ModelConfig {
    int dim = 2;
    int latent = 128;
    int m_enc = 2;
    int m_gu = 2;
    std::vector<int> pooling_ratios;
    int m_proc = 0;
    double noise_std = 0.003;
    double world_radius = 0.0;

    bool baseline() const { return pooling_ratios.empty(); }
    int num_stages() const { return (int)pooling_ratios.size(); }
    void validate() const;
};

nlohmann::ordered_json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::ordered_json& j);
ModelConfig load_config(const std::string& path);

}  // namespace sgsim
