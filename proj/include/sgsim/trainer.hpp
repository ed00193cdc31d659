#pragma once

#include <functional>

#include "sgsim/checkpoint.hpp"
#include "sgsim/model.hpp"
#include "sgsim/transfer.hpp"

namespace sgsim {

/// Raised when training or evaluation produces non-finite numbers.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One training sample: a (possibly noise-perturbed) state at step t and the
/// raw next-step deltas the model should predict from it.
struct Sample {
    MeshState state;
    TensorT<double> target_m;  // [nv, dim]: next position minus current
    TensorT<double> target_e;  // [ne, dim]: next centroid minus current
};

/// Gaussian noise (std per coordinate) on the positions of non-prescribed
/// vertices; targets point from the noisy state to the true next frame.
Sample noisy_sample(const Trajectory& traj, int t, double noise_std, Rng& rng);

/// Closed-loop rollout skeleton: the predictor proposes next positions, then
/// prescribed vertices get their ground-truth motion. Frame 0 is ground truth.
using PredictFn = std::function<TensorT<double>(const MeshState& state, int t)>;
std::vector<TensorT<double>> rollout_with(const Trajectory& traj, const PredictFn& predict);

/// Model-driven rollout: rebuild graph and features each step, predict
/// normalized deltas, denormalize, integrate. The pooling plan stays fixed.
std::vector<TensorT<double>> rollout(const ModelConfig& config, const ParamStore& params,
                                     const Normalizers& norms, const PoolingPlan& plan,
                                     const Trajectory& traj);

/// Root-mean-square position error over free mesh vertices, all coordinates,
/// every predicted step.
double position_rmse(const std::vector<TensorT<double>>& pred, const Trajectory& gt);

struct TrainOptions {
    ModelConfig config;
    std::string manifest_path;
    int steps = 2000;
    int batch = 2;
    double lr_start = 1e-4, lr_end = 1e-6;
    double lambda = 0.0;  // weight drift penalty; 0 disables it entirely
    uint64_t seed = 0;
    double data_fraction = 1.0;
    int val_interval = 500;
    int workers = 1;
    std::string out_checkpoint;      // best-by-validation weights; empty skips writing
    std::string log_path;            // CSV (step, train loss, val rmse, wall time)
    std::string source_checkpoint;   // pre-trained weights to transplant; empty trains from scratch
    MapStrategy strategy = MapStrategy::Uniform;
    void validate() const;
};

struct TrainResult {
    std::vector<double> step_loss;                 // task loss per step
    std::vector<std::pair<int, double>> val_rmse;  // (step, mean validation rollout rmse)
    double best_val = 0.0;
    int best_step = -1;
    Checkpoint best;
};

TrainResult train(const TrainOptions& opt);

/// Training-set indices actually used for a fraction in (0, 1]: a seeded
/// shuffle prefix, so smaller fractions are subsets of larger ones.
std::vector<int> fraction_subset(const std::vector<int>& train_idx, double fraction, uint64_t seed);

}  // namespace sgsim
