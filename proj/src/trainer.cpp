#include "sgsim/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <thread>

#include "sgsim/adam.hpp"

namespace sgsim {

Sample noisy_sample(const Trajectory& traj, int t, double noise_std, Rng& rng) {
    if (t < 0 || t + 1 >= traj.num_steps())
        throw std::invalid_argument("noisy_sample: step " + std::to_string(t) + " has no successor");
    Sample s;
    s.state = traj.state_at(t);
    int nv = s.state.num_vertices(), dim = s.state.dim;
    for (int v = 0; v < nv; ++v) {
        if (s.state.boundary[v] == 1) continue;
        for (int d = 0; d < dim; ++d) s.state.pos.at(v, d) += rng.normal(0.0, noise_std);
    }
    const TensorT<double>& next = traj.frames[t + 1];
    s.target_m = TensorT<double>({nv, dim});
    for (int v = 0; v < nv; ++v)
        for (int d = 0; d < dim; ++d) s.target_m.at(v, d) = next.at(v, d) - s.state.pos.at(v, d);
    TensorT<double> c_now = s.state.centroids(s.state.pos);
    TensorT<double> c_next = s.state.centroids(next);
    s.target_e = TensorT<double>({s.state.num_elements(), dim});
    for (size_t i = 0; i < s.target_e.size(); ++i) s.target_e.data[i] = c_next.data[i] - c_now.data[i];
    return s;
}

std::vector<TensorT<double>> rollout_with(const Trajectory& traj, const PredictFn& predict) {
    std::vector<TensorT<double>> out;
    out.push_back(traj.frames.at(0));
    MeshState state = traj.state_at(0);
    for (int t = 0; t + 1 < traj.num_steps(); ++t) {
        TensorT<double> next = predict(state, t);
        if (next.shape != state.pos.shape) throw std::invalid_argument("rollout: predictor shape mismatch");
        for (int v = 0; v < state.num_vertices(); ++v)
            if (state.boundary[v] == 1)
                for (int d = 0; d < state.dim; ++d) next.at(v, d) = traj.frames[t + 1].at(v, d);
        out.push_back(next);
        state.pos = out.back();
    }
    return out;
}

std::vector<TensorT<double>> rollout(const ModelConfig& config, const ParamStore& params,
                                     const Normalizers& norms, const PoolingPlan& plan,
                                     const Trajectory& traj) {
    return rollout_with(traj, [&](const MeshState& state, int) {
        HeteroGraph g = build_hetero_graph(state, config.world_radius);
        TapeT<float> tape;
        BinderT<float> binder(tape, params, false);
        ForwardOut fw = forward_graph(tape, binder, config, g, plan, norms);
        const TensorT<float>& pm = tape.val(fw.pred_m);
        TensorT<double> next = state.pos;
        std::vector<double> row(config.dim);
        for (int v = 0; v < state.num_vertices(); ++v) {
            for (int d = 0; d < config.dim; ++d) row[d] = pm.at(v, d);
            norms.out_m.denormalize_row(row.data());
            for (int d = 0; d < config.dim; ++d) next.at(v, d) += row[d];
        }
        return next;
    });
}

double position_rmse(const std::vector<TensorT<double>>& pred, const Trajectory& gt) {
    if ((int)pred.size() != gt.num_steps()) throw std::invalid_argument("position_rmse: step count mismatch");
    double acc = 0.0;
    long long count = 0;
    for (int t = 1; t < gt.num_steps(); ++t)
        for (int v = 0; v < gt.base.num_vertices(); ++v) {
            if (gt.base.boundary[v] == 1) continue;
            for (int d = 0; d < gt.base.dim; ++d) {
                double e = pred[t].at(v, d) - gt.frames[t].at(v, d);
                acc += e * e;
                ++count;
            }
        }
    return count == 0 ? 0.0 : std::sqrt(acc / count);
}

void TrainOptions::validate() const {
    config.validate();
    if (steps < 1 || batch < 1 || val_interval < 1 || workers < 1)
        throw std::invalid_argument("train options: steps, batch, val_interval, workers must be >= 1");
    if (lr_start <= 0.0 || lr_end <= 0.0) throw std::invalid_argument("train options: learning rates must be > 0");
    if (lambda < 0.0) throw std::invalid_argument("train options: lambda must be >= 0");
    if (!(data_fraction > 0.0 && data_fraction <= 1.0))
        throw std::invalid_argument("train options: data_fraction must be in (0, 1]");
    if (manifest_path.empty()) throw std::invalid_argument("train options: manifest_path required");
}

std::vector<int> fraction_subset(const std::vector<int>& train_idx, double fraction, uint64_t seed) {
    std::vector<int> idx = train_idx;
    if (fraction >= 1.0) return idx;
    Rng rng(mix_seed(seed, 0xDA7A));
    for (int i = (int)idx.size() - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    int keep = std::max<int>(1, (int)std::llround(fraction * (double)idx.size()));
    idx.resize(std::min<int>(keep, (int)idx.size()));
    return idx;
}

namespace {

struct SampleWork {
    Sample sample;
    HeteroGraph graph;
    const PoolingPlan* plan = nullptr;
};

/// Forward + loss + backward for one sample; gradients land in a private
/// store-aligned accumulator so batch assembly order is fixed.
double sample_grads(const ModelConfig& cfg, const ParamStore& params, const Normalizers& norms,
                    const SampleWork& w, std::vector<Tensor>& acc) {
    TapeT<float> tape;
    BinderT<float> binder(tape, params, true);
    ForwardOut fw = forward_graph(tape, binder, cfg, w.graph, *w.plan, norms);
    int loss = task_loss(tape, fw, w.sample.target_m, w.sample.target_e, w.sample.state.boundary, norms);
    tape.backward(loss);
    binder.accumulate_grads(acc);
    return tape.val(loss).data[0];
}

}  // namespace

TrainResult train(const TrainOptions& opt) {
    opt.validate();
    DatasetManifest man = load_manifest(opt.manifest_path);
    std::string dir = manifest_dir(opt.manifest_path);
    if (man.train.empty() || man.valid.empty())
        throw std::runtime_error("train: manifest needs non-empty train and valid splits");

    std::vector<int> train_idx = fraction_subset(man.train, opt.data_fraction, opt.seed);

    // Load every referenced trajectory once.
    std::vector<Trajectory> trajs(man.files.size());
    std::vector<char> loaded(man.files.size(), 0);
    auto need = [&](int i) {
        if (!loaded[i]) {
            trajs[i] = load_trajectory(dir + "/" + man.files[i]);
            loaded[i] = 1;
        }
    };
    for (int i : train_idx) need(i);
    for (int i : man.valid) need(i);

    std::vector<PoolingPlan> plans(man.files.size());
    std::vector<char> planned(man.files.size(), 0);
    auto plan_of = [&](int i) -> const PoolingPlan& {
        if (!planned[i]) {
            plans[i] = plan_for_state(trajs[i].base, opt.config);
            planned[i] = 1;
        }
        return plans[i];
    };

    ParamStore params;
    Normalizers norms = Normalizers::make(opt.config);
    AnchorSet anchors;
    if (opt.source_checkpoint.empty()) {
        params = init_params<float>(opt.config, opt.seed);
    } else {
        Checkpoint src = load_checkpoint(opt.source_checkpoint);
        TransferResult tr = transplant(src, opt.config, {opt.strategy, opt.seed});
        params = std::move(tr.params);
        norms = tr.norms;
        anchors = make_anchors(params, tr.anchor_names);
    }

    Rng sample_rng(mix_seed(opt.seed, 1));
    Rng noise_rng(mix_seed(opt.seed, 2));
    AdamT<float> adam;
    TrainResult res;
    res.best_val = std::numeric_limits<double>::infinity();

    std::ofstream log;
    if (!opt.log_path.empty()) {
        log.open(opt.log_path);
        if (!log) throw std::runtime_error("cannot open log for write: " + opt.log_path);
        log << "step,train_loss,val_rmse,wall_time\n";
    }
    auto t0 = std::chrono::steady_clock::now();
    double interval_loss = 0.0;
    int interval_count = 0;

    auto validate_now = [&](int step_no) {
        double sum = 0.0;
        for (int i : man.valid) {
            auto pred = rollout(opt.config, params, norms, plan_of(i), trajs[i]);
            sum += position_rmse(pred, trajs[i]);
        }
        double rmse = sum / (double)man.valid.size();
        if (!std::isfinite(rmse))
            throw NumericError("train: non-finite validation rmse at step " + std::to_string(step_no));
        res.val_rmse.emplace_back(step_no, rmse);
        if (rmse < res.best_val) {
            res.best_val = rmse;
            res.best_step = step_no;
            res.best = make_checkpoint(opt.config, params, norms);
        }
        if (log) {
            double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            double mean_loss = interval_count ? interval_loss / interval_count : 0.0;
            log << step_no << "," << mean_loss << "," << rmse << "," << wall << "\n";
        }
        interval_loss = 0.0;
        interval_count = 0;
    };

    double lr_ratio = opt.lr_end / opt.lr_start;
    for (int step = 0; step < opt.steps; ++step) {
        // Draw the whole batch (and its noise) up front in a fixed order.
        std::vector<SampleWork> batch(opt.batch);
        for (int b = 0; b < opt.batch; ++b) {
            int ti = train_idx[sample_rng.uniform_int((int)train_idx.size())];
            const Trajectory& traj = trajs[ti];
            int t = sample_rng.uniform_int(traj.num_steps() - 1);
            batch[b].sample = noisy_sample(traj, t, opt.config.noise_std, noise_rng);
            batch[b].graph = build_hetero_graph(batch[b].sample.state, opt.config.world_radius);
            batch[b].plan = &plan_of(ti);
        }
        // Statistics first so this batch is normalized with them included.
        for (const auto& w : batch) {
            norms.in_xm.update(w.graph.xm);
            norms.in_xe.update(w.graph.xe);
            norms.in_mm.update(w.graph.mm.feat);
            norms.in_ee.update(w.graph.ee.feat);
            norms.in_me.update(w.graph.me.feat);
            norms.in_em.update(w.graph.em.feat);
            for (int v = 0; v < w.sample.state.num_vertices(); ++v)
                if (w.sample.state.boundary[v] == 0)
                    norms.out_m.update_row(&w.sample.target_m.data[(size_t)v * w.sample.state.dim]);
            norms.out_e.update(w.sample.target_e);
        }

        std::vector<std::vector<Tensor>> grads_by_sample(opt.batch);
        std::vector<double> loss_by_sample(opt.batch, 0.0);
        int nthreads = std::min(opt.workers, opt.batch);
        if (nthreads <= 1) {
            for (int b = 0; b < opt.batch; ++b)
                loss_by_sample[b] = sample_grads(opt.config, params, norms, batch[b], grads_by_sample[b]);
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < nthreads; ++w)
                pool.emplace_back([&, w]() {
                    for (int b = w; b < opt.batch; b += nthreads)
                        loss_by_sample[b] =
                            sample_grads(opt.config, params, norms, batch[b], grads_by_sample[b]);
                });
            for (auto& th : pool) th.join();
        }

        // Fold per-sample gradients in sample order: identical result for any
        // worker count.
        std::vector<Tensor> grads;
        for (const auto& t : params.tensors) grads.emplace_back(t.shape);
        double loss_sum = 0.0;
        for (int b = 0; b < opt.batch; ++b) {
            loss_sum += loss_by_sample[b];
            for (size_t i = 0; i < grads.size(); ++i)
                for (size_t j = 0; j < grads[i].size(); ++j)
                    grads[i].data[j] += grads_by_sample[b][i].data[j];
        }
        double task_loss_mean = loss_sum / opt.batch;
        if (!std::isfinite(task_loss_mean))
            throw NumericError("train: non-finite loss at step " + std::to_string(step));
        res.step_loss.push_back(task_loss_mean);
        interval_loss += task_loss_mean;
        interval_count += 1;

        float inv_batch = 1.0f / (float)opt.batch;
        for (auto& g : grads)
            for (auto& v : g.data) v *= inv_batch;
        if (opt.lambda > 0.0 && !anchors.param_index.empty())
            add_frobenius_grad(params, anchors, opt.lambda, grads);

        double frac = opt.steps > 1 ? (double)step / (double)(opt.steps - 1) : 0.0;
        double lr = opt.lr_start * std::pow(lr_ratio, frac);
        adam.step(params.tensors, grads, lr);

        if ((step + 1) % opt.val_interval == 0 || step + 1 == opt.steps) validate_now(step + 1);
    }

    if (!opt.out_checkpoint.empty()) save_checkpoint(res.best, opt.out_checkpoint);
    return res;
}

}  // namespace sgsim
