// Command-line front end: sweep, trace, pretrain, eval, wcnf.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "qubodbn/checkpoint.hpp"
#include "qubodbn/errors.hpp"
#include "qubodbn/harness.hpp"
#include "qubodbn/maxsat.hpp"
#include "qubodbn/qubo.hpp"

namespace {

using namespace qubodbn;

struct CommonOptions {
    std::string config_path;
    std::string out_path;
    std::map<std::string, std::string> overrides;
};

std::string kebab(std::string key) {
    std::replace(key.begin(), key.end(), '_', '-');
    return key;
}

void add_config_options(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "key=value configuration file");
    cmd->add_option("--out", opts.out_path, "output file (default: stdout)");
    for (const auto& [key, value] : default_config()) {
        cmd->add_option_function<std::string>(
               "--" + kebab(key), [&opts, key](const std::string& v) { opts.overrides[key] = v; },
               "default: " + (value.empty() ? std::string("(none)") : value))
            ->group("Configuration keys");
    }
    cmd->add_option_function<std::string>(
           "--seed", [&opts](const std::string& v) { opts.overrides["seeds"] = v; }, "alias for --seeds")
        ->group("Configuration keys");
    cmd->add_option_function<std::string>(
           "--sampler", [&opts](const std::string& v) { opts.overrides["samplers"] = v; },
           "cd | qubo-best | qubo-avg | exact | none | bn-relu (comma-separated for sweeps)")
        ->group("Configuration keys");
}

ExperimentConfig resolve(const CommonOptions& opts) {
    ConfigMap map;
    if (!opts.config_path.empty()) map = load_config_file(opts.config_path);
    map = merge_config(map, opts.overrides);
    return ExperimentConfig::from_map(map);
}

void emit(const CommonOptions& opts, const std::string& text, bool binary = false) {
    if (opts.out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(opts.out_path, binary ? std::ios::binary : std::ios::out);
    if (!out) throw ArgumentError("cannot write " + opts.out_path);
    out << text;
}

std::string config_text(const ConfigMap& map) {
    std::ostringstream ss;
    for (const auto& [k, v] : map) ss << k << '=' << v << '\n';
    return ss.str();
}

void run_sweep(const CommonOptions& opts) {
    const ExperimentConfig cfg = resolve(opts);
    std::ostringstream ss;
    if (cfg.experiment == Experiment::solver_trace) {
        emit_trace(ss, cfg);
    } else {
        write_results_csv(ss, cfg, run_experiment(cfg));
    }
    emit(opts, ss.str());
}

void run_trace(const CommonOptions& opts) {
    std::ostringstream ss;
    emit_trace(ss, resolve(opts));
    emit(opts, ss.str());
}

void run_pretrain(const CommonOptions& opts) {
    if (opts.out_path.empty()) throw ArgumentError("pretrain needs --out for the checkpoint");
    const ExperimentConfig cfg = resolve(opts);
    const PreparedData data = prepare_data(cfg);
    const LabeledImages& train = data.partitions.front();
    const std::string& method = cfg.methods.front();
    const PretrainConfig pcfg = pretrain_config_for(cfg, method, cfg.pretrain_iters.back());

    std::vector<int> sizes{static_cast<int>(train.images.cols())};
    sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    Rng init_rng = make_stream(cfg.seeds.front(), 1);
    Rng pre_rng = make_stream(cfg.seeds.front(), 2);
    const DbnPretrainResult r =
        pretrain_dbn(DbnModel::initialize(sizes, 10, init_rng), train.images, pcfg, pre_rng, cfg.propagation);

    Checkpoint ckpt{r.model, std::nullopt, config_text(cfg.source)};
    save_checkpoint(opts.out_path, ckpt);

    write_config_header(std::cout, cfg.source);
    std::cout << "layer,iteration,alpha,reconstruction_error,solve_weight,restarts\n";
    for (std::size_t l = 0; l < r.logs.size(); ++l) {
        for (const auto& e : r.logs[l]) {
            std::cout << l << ',' << e.iteration << ',' << format_real(e.alpha) << ','
                      << format_real(e.reconstruction_error) << ','
                      << (e.solve_weight ? format_real(*e.solve_weight) : std::string()) << ',' << e.restarts
                      << '\n';
        }
    }
}

void run_eval(const CommonOptions& opts, const std::string& model_path) {
    const ExperimentConfig cfg = resolve(opts);
    Checkpoint ckpt = load_checkpoint(model_path);
    const PreparedData data = prepare_data(cfg);
    const LabeledImages& train = data.partitions.front();
    const std::string& method = cfg.methods.front();
    const SupervisedConfig scfg = supervised_config_for(cfg, method, cfg.backprop_iters.back());
    if (scfg.batch_norm && !ckpt.bn) ckpt.bn = BatchNormState::for_model(ckpt.model);
    if (!scfg.batch_norm) ckpt.bn.reset();

    std::ostringstream ss;
    write_config_header(ss, cfg.source);
    ss << "# model=" << model_path << '\n';
    ss << "backprop_iters,accuracy\n";
    auto report = [&](int step, const DbnModel& m, const BatchNormState* b) {
        if (std::binary_search(cfg.backprop_iters.begin(), cfg.backprop_iters.end(), step)) {
            ss << step << ',' << format_real(evaluate(m, data.test.images, data.test.labels, scfg, b)) << '\n';
        }
    };
    report(0, ckpt.model, ckpt.bn ? &*ckpt.bn : nullptr);
    Rng tune_rng = make_stream(cfg.seeds.front(), 3);
    fine_tune(ckpt.model, train.images, train.labels, scfg, ckpt.bn, tune_rng, report);
    emit(opts, ss.str());
}

void run_wcnf(const CommonOptions& opts) {
    const ExperimentConfig cfg = resolve(opts);
    Rng rng = make_stream(cfg.seeds.front(), 4);
    const RbmParams params = RbmParams::gaussian(cfg.trace_visible, cfg.trace_hidden, cfg.trace_stddev, rng);
    std::ostringstream ss;
    write_wcnf(ss, qubo_to_wcnf(rbm_to_qubo(params)));
    emit(opts, ss.str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RBM / DBN pretraining with QUBO and weighted MAX-SAT sampling"};
    app.require_subcommand(1);

    CommonOptions sweep_opts, trace_opts, pretrain_opts, eval_opts, wcnf_opts;
    std::string model_path;
    auto* sweep = app.add_subcommand("sweep", "run an accuracy sweep and write CSV");
    add_config_options(sweep, sweep_opts);
    auto* trace = app.add_subcommand("trace", "write the solver trajectory of one QUBO solve as CSV");
    add_config_options(trace, trace_opts);
    auto* pretrain = app.add_subcommand("pretrain", "pretrain a DBN and save a checkpoint");
    add_config_options(pretrain, pretrain_opts);
    auto* eval = app.add_subcommand("eval", "fine-tune a checkpoint and report test accuracy");
    add_config_options(eval, eval_opts);
    eval->add_option("--model", model_path, "checkpoint written by pretrain")->required();
    auto* wcnf = app.add_subcommand("wcnf", "write the weighted MAX-SAT instance of a random RBM");
    add_config_options(wcnf, wcnf_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        std::cerr << "qubodbn: error: " << msg << '\n';
        return 2;
    }

    try {
        if (*sweep) run_sweep(sweep_opts);
        if (*trace) run_trace(trace_opts);
        if (*pretrain) run_pretrain(pretrain_opts);
        if (*eval) run_eval(eval_opts, model_path);
        if (*wcnf) run_wcnf(wcnf_opts);
    } catch (const std::exception& e) {
        std::cerr << "qubodbn: error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
