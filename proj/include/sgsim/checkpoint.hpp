#pragma once

#include <string>

#include "sgsim/params.hpp"

namespace sgsim {

/// Everything needed to resume or transfer a model: architecture, weights,
/// normalizer statistics, optionally Adam state. On disk: magic, version, a
/// JSON manifest (config + ordered tensor table), then raw f32 data.
struct Checkpoint {
    ModelConfig config;
    ParamStore params;
    Normalizers norms;
    bool has_opt = false;
    long long opt_step = 0;
    std::vector<Tensor> opt_m, opt_v;  // aligned with params order
};

Checkpoint make_checkpoint(const ModelConfig& config, const ParamStore& params, const Normalizers& norms);

void save_checkpoint(const Checkpoint& ck, const std::string& path);

/// Loads and validates: the tensor table must match the stored config's
/// canonical parameter list exactly (names, order, shapes).
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sgsim
