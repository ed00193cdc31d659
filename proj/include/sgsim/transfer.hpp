#pragma once

#include "sgsim/checkpoint.hpp"

namespace sgsim {

enum class MapStrategy { Uniform, FirstN };

MapStrategy strategy_from_string(const std::string& s);  // "uniform" | "first-n"
std::string strategy_name(MapStrategy s);

/// How one target block gets its weights from source blocks.
struct BlockProvenance {
    enum class Kind { Copied, Averaged, Fresh } kind = Kind::Fresh;
    std::vector<int> sources;  // source block indices; empty for Fresh
};

/// Index-level alignment of n_src ordered blocks onto n_tgt slots.
/// Uniform repeats blocks when growing (target i copies source floor(i/upN),
/// upN = ceil(n_tgt/n_src)) and averages contiguous groups when shrinking
/// (the first n_src mod n_tgt targets take one extra source). FirstN copies
/// the leading min(n_src, n_tgt) blocks and leaves the rest fresh.
std::vector<BlockProvenance> map_blocks(int n_src, int n_tgt, MapStrategy strategy);

struct TransferOptions {
    MapStrategy strategy = MapStrategy::Uniform;
    uint64_t seed = 0;
};

struct TransferResult {
    ParamStore params;
    Normalizers norms;
    std::vector<std::string> anchor_names;  // transferred U-net tensors, for the drift penalty
    nlohmann::ordered_json report;          // per-tensor provenance
};

/// Build fine-tune initial weights from a pre-trained checkpoint: encoder and
/// decoder are re-initialized from the seed, the U-net (or flat processor) is
/// aligned block-by-block, normalizer statistics carry over when the feature
/// widths agree. Latent widths must match, and baseline checkpoints cannot
/// seed staged models or vice versa.
TransferResult transplant(const Checkpoint& src, const ModelConfig& tgt_config, const TransferOptions& opt);

/// Snapshot of transferred weights used to penalize drift during fine-tuning.
struct AnchorSet {
    std::vector<int> param_index;  // into the fine-tune store
    std::vector<Tensor> values;
};

AnchorSet make_anchors(const ParamStore& params, const std::vector<std::string>& names);

/// Sum of squared Frobenius distances between current weights and anchors.
double frobenius_penalty(const ParamStore& params, const AnchorSet& anchors);

/// grads += lambda * d/dW sum ||W - W_anchor||^2 = lambda * 2 (W - W_anchor).
void add_frobenius_grad(const ParamStore& params, const AnchorSet& anchors, double lambda,
                        std::vector<Tensor>& grads);

}  // namespace sgsim
