#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "qubodbn/data.hpp"
#include "qubodbn/dbn.hpp"

namespace qubodbn {

/// Flat key=value configuration. Keys are snake_case; the CLI accepts each as --kebab-case.
using ConfigMap = std::map<std::string, std::string>;

/// Every recognised key with its default value.
const ConfigMap& default_config();

/// Parses "key = value" lines; '#' starts a comment. Unknown keys are rejected.
ConfigMap parse_config_text(std::string_view text);
ConfigMap load_config_file(const std::filesystem::path& path);

/// defaults <- file <- overrides, validating every key.
ConfigMap merge_config(const ConfigMap& base, const ConfigMap& overrides);

/// "1,2,5" or "1..50" (inclusive) or a mix such as "0,5..7".
std::vector<int> parse_int_list(std::string_view text);

enum class Experiment { minibatch_sweep, fullbatch_sweep, bn_relu_comparison, solver_trace };

struct ExperimentConfig {
    Experiment experiment = Experiment::minibatch_sweep;
    std::vector<std::string> methods;  // cd, qubo-best, qubo-avg, exact, none, bn-relu
    std::vector<int> pretrain_iters;
    std::vector<int> backprop_iters;   // checkpoints, ascending
    std::vector<std::uint64_t> seeds;
    std::vector<int> hidden_sizes;
    int backprop_minibatch = 100;  // 0: full batch
    PretrainConfig pretrain;       // iterations and sampler are filled per cell
    SupervisedConfig supervised;
    Propagation propagation = Propagation::probabilities;

    std::filesystem::path train_images;
    std::filesystem::path train_labels;
    std::filesystem::path test_images;  // empty: hold out test_size images from the training file
    std::filesystem::path test_labels;
    std::size_t train_size = 2000;
    std::size_t test_size = 1000;
    int num_parts = 0;  // 0: one partition per seed
    std::uint64_t data_seed = 0;

    int trace_visible = 32;
    int trace_hidden = 32;
    double trace_stddev = 1.0;

    bool timing = false;

    ConfigMap source;  // fully resolved key=value view, echoed into output headers

    static ExperimentConfig from_map(const ConfigMap& map);
};

struct ResultRow {
    std::string method;
    int pretrain_iters = 0;
    int backprop_iters = 0;
    std::uint64_t seed = 0;
    int partition = 0;
    double accuracy = 0.0;
    double wall_time_seconds = 0.0;
};

struct PreparedData {
    std::vector<LabeledImages> partitions;  // reduced 32-pixel training parts
    LabeledImages test;                     // reduced
};

PreparedData prepare_data(const ExperimentConfig& cfg);

/// One (method, pretrain N, seed) cell: pretrain, attach the head, back-propagate
/// to each checkpoint and evaluate.
std::vector<ResultRow> run_cell(const ExperimentConfig& cfg, const PreparedData& data,
                                const std::string& method, int pretrain_iters, std::size_t seed_index);

/// All cells, sorted by (method, pretrain_iters, backprop_iters, seed).
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg);
std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const PreparedData& data);

void write_results_csv(std::ostream& out, const ExperimentConfig& cfg,
                       const std::vector<ResultRow>& rows);

/// Solves the QUBO of a random RBM once and returns the result.
SolveResult trace_solve(const ExperimentConfig& cfg);

/// Writes (flip_count, best_weight, is_restart) rows for trace_solve(cfg).
void emit_trace(std::ostream& out, const ExperimentConfig& cfg);

/// Pretraining settings for one method name; throws ConfigError for unknown names.
PretrainConfig pretrain_config_for(const ExperimentConfig& cfg, const std::string& method, int iterations);
SupervisedConfig supervised_config_for(const ExperimentConfig& cfg, const std::string& method, int iterations);

/// Writes "# key=value" lines for every resolved key.
void write_config_header(std::ostream& out, const ConfigMap& map);

std::string format_real(double x);

}  // namespace qubodbn
