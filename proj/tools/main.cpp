#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "sgsim/fem.hpp"
#include "sgsim/trainer.hpp"

using namespace sgsim;

namespace {

struct GenArgs {
    std::string out = "data";
    std::string name = "plates";
    std::string family = "broad";
    int count = 12;
    int steps = 24;
    uint64_t seed = 1;
};

int run_gen(const GenArgs& a) {
    Rng rng(a.seed);
    std::vector<fem::PlateScenario> scenarios;
    for (int i = 0; i < a.count; ++i) {
        fem::PlateScenario sc;
        if (a.family == "broad")
            sc = fem::random_scenario_broad(rng);
        else if (a.family == "shifted")
            sc = fem::random_scenario_shifted(rng);
        else
            throw std::invalid_argument("unknown family '" + a.family + "' (expected broad or shifted)");
        sc.steps = a.steps;
        scenarios.push_back(sc);
    }
    std::string manifest = fem::generate_dataset(scenarios, a.out, a.name);
    std::cout << "wrote " << a.count << " trajectories, manifest " << manifest << "\n";
    return 0;
}

struct TrainArgs {
    std::string config_path;
    std::string manifest;
    std::string out = "model.sgck";
    std::string log;
    std::string source;
    std::string strategy = "uniform";
    int steps = 2000;
    int batch = 2;
    double lr_start = 1e-4, lr_end = 1e-6;
    double lambda = 1e-4;  // only takes effect when a source checkpoint anchors tensors
    double fraction = 1.0;
    int val_interval = 500;
    int workers = 1;
    uint64_t seed = 0;
};

int run_train(const TrainArgs& a, bool finetune) {
    TrainOptions opt;
    opt.config = load_config(a.config_path);
    opt.manifest_path = a.manifest;
    opt.steps = a.steps;
    opt.batch = a.batch;
    opt.lr_start = a.lr_start;
    opt.lr_end = a.lr_end;
    opt.lambda = a.lambda;
    opt.seed = a.seed;
    opt.data_fraction = a.fraction;
    opt.val_interval = a.val_interval;
    opt.workers = a.workers;
    opt.out_checkpoint = a.out;
    opt.log_path = a.log;
    if (finetune) {
        if (a.source.empty()) throw std::invalid_argument("finetune requires --source");
        opt.source_checkpoint = a.source;
        opt.strategy = strategy_from_string(a.strategy);
    }
    TrainResult res = train(opt);
    std::cout << "best validation rmse " << res.best_val << " at step " << res.best_step << ", saved "
              << a.out << "\n";
    return 0;
}

struct TransplantArgs {
    std::string source;
    std::string config_path;
    std::string out = "transplanted.sgck";
    std::string report;
    std::string strategy = "uniform";
    uint64_t seed = 0;
};

int run_transplant(const TransplantArgs& a) {
    Checkpoint src = load_checkpoint(a.source);
    ModelConfig cfg = load_config(a.config_path);
    TransferResult tr = transplant(src, cfg, {strategy_from_string(a.strategy), a.seed});
    save_checkpoint(make_checkpoint(cfg, tr.params, tr.norms), a.out);
    if (!a.report.empty()) {
        std::ofstream os(a.report);
        if (!os) throw std::runtime_error("cannot open for write: " + a.report);
        os << tr.report.dump(2) << "\n";
    }
    const auto& s = tr.report.at("summary");
    std::cout << "transplanted " << a.source << " -> " << a.out << " (copied " << s.at("copied")
              << ", averaged " << s.at("averaged") << ", fresh " << s.at("fresh") << ")\n";
    return 0;
}

struct RolloutArgs {
    std::string checkpoint;
    std::string trajectory;
    std::string out;
};

int run_rollout(const RolloutArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    Trajectory gt = load_trajectory(a.trajectory);
    PoolingPlan plan = plan_for_state(gt.base, ck.config);
    auto pred = rollout(ck.config, ck.params, ck.norms, plan, gt);
    double rmse = position_rmse(pred, gt);
    if (!a.out.empty()) {
        Trajectory out = gt;
        out.frames = pred;
        save_trajectory(out, a.out);
    }
    std::cout << "rollout rmse " << rmse << "\n";
    return 0;
}

struct EvalArgs {
    std::string checkpoint;
    std::string manifest;
    std::string split = "test";
    std::string report;
};

int run_eval(const EvalArgs& a) {
    Checkpoint ck = load_checkpoint(a.checkpoint);
    DatasetManifest man = load_manifest(a.manifest);
    std::string dir = manifest_dir(a.manifest);
    const std::vector<int>* idx = nullptr;
    if (a.split == "train") idx = &man.train;
    else if (a.split == "valid") idx = &man.valid;
    else if (a.split == "test") idx = &man.test;
    else throw std::invalid_argument("unknown split '" + a.split + "'");
    if (idx->empty()) throw std::runtime_error("eval: split '" + a.split + "' is empty");

    nlohmann::ordered_json per = nlohmann::ordered_json::array();
    double sum = 0.0;
    for (int i : *idx) {
        Trajectory gt = load_trajectory(dir + "/" + man.files[i]);
        PoolingPlan plan = plan_for_state(gt.base, ck.config);
        double rmse = position_rmse(rollout(ck.config, ck.params, ck.norms, plan, gt), gt);
        per.push_back({{"file", man.files[i]}, {"rmse", rmse}});
        sum += rmse;
    }
    double mean = sum / (double)idx->size();
    nlohmann::ordered_json rep;
    rep["split"] = a.split;
    rep["mean_rmse"] = mean;
    rep["trajectories"] = per;
    if (!a.report.empty()) {
        std::ofstream os(a.report);
        if (!os) throw std::runtime_error("cannot open for write: " + a.report);
        os << rep.dump(2) << "\n";
    }
    std::cout << rep.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"graph-network simulator for quasi-static mesh deformation"};
    app.require_subcommand(1);

    GenArgs ga;
    auto* gen = app.add_subcommand("gen", "generate a synthetic plate-indentation dataset");
    gen->add_option("--out", ga.out, "output directory");
    gen->add_option("--name", ga.name, "dataset name (manifest + file prefix)");
    gen->add_option("--family", ga.family, "scenario family: broad | shifted");
    gen->add_option("--count", ga.count, "number of trajectories");
    gen->add_option("--steps", ga.steps, "steps per trajectory");
    gen->add_option("--seed", ga.seed, "scenario seed");

    TrainArgs ta;
    auto add_train_opts = [&](CLI::App* c, bool finetune) {
        c->add_option("--config", ta.config_path, "model config json")->required();
        c->add_option("--manifest", ta.manifest, "dataset manifest")->required();
        c->add_option("--out", ta.out, "output checkpoint");
        c->add_option("--log", ta.log, "training log csv");
        c->add_option("--steps", ta.steps, "optimization steps");
        c->add_option("--batch", ta.batch, "batch size");
        c->add_option("--lr-start", ta.lr_start, "initial learning rate");
        c->add_option("--lr-end", ta.lr_end, "final learning rate");
        c->add_option("--val-interval", ta.val_interval, "steps between validation rollouts");
        c->add_option("--workers", ta.workers, "data-parallel gradient workers");
        c->add_option("--seed", ta.seed, "run seed");
        if (finetune) {
            c->add_option("--source", ta.source, "pre-trained checkpoint")->required();
            c->add_option("--strategy", ta.strategy, "weight mapping: uniform | first-n");
            c->add_option("--lambda", ta.lambda, "drift penalty weight");
            c->add_option("--fraction", ta.fraction, "fraction of the train split to use");
        }
    };
    auto* pre = app.add_subcommand("pretrain", "train a model from scratch");
    add_train_opts(pre, false);
    auto* fin = app.add_subcommand("finetune", "transplant a checkpoint and keep training");
    add_train_opts(fin, true);

    TransplantArgs xa;
    auto* xp = app.add_subcommand("transplant", "map pre-trained weights onto a new architecture");
    xp->add_option("--source", xa.source, "source checkpoint")->required();
    xp->add_option("--config", xa.config_path, "target model config json")->required();
    xp->add_option("--out", xa.out, "output checkpoint");
    xp->add_option("--report", xa.report, "write per-tensor provenance json");
    xp->add_option("--strategy", xa.strategy, "weight mapping: uniform | first-n");
    xp->add_option("--seed", xa.seed, "seed for freshly initialized tensors");

    RolloutArgs ra;
    auto* ro = app.add_subcommand("rollout", "closed-loop rollout against one trajectory");
    ro->add_option("--checkpoint", ra.checkpoint, "model checkpoint")->required();
    ro->add_option("--trajectory", ra.trajectory, "ground-truth trajectory file")->required();
    ro->add_option("--out", ra.out, "write predicted trajectory here");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "mean rollout rmse over a dataset split");
    ev->add_option("--checkpoint", ea.checkpoint, "model checkpoint")->required();
    ev->add_option("--manifest", ea.manifest, "dataset manifest")->required();
    ev->add_option("--split", ea.split, "train | valid | test");
    ev->add_option("--report", ea.report, "write json report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed()) return run_gen(ga);
        if (pre->parsed()) return run_train(ta, false);
        if (fin->parsed()) return run_train(ta, true);
        if (xp->parsed()) return run_transplant(xa);
        if (ro->parsed()) return run_rollout(ra);
        if (ev->parsed()) return run_eval(ea);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
