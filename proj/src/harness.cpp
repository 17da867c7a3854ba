#include "qubodbn/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <tuple>

#include "qubodbn/errors.hpp"
#include "qubodbn/qubo.hpp"

namespace qubodbn {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        std::string item = trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
        if (!item.empty()) out.push_back(std::move(item));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

long long parse_integer(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) throw ConfigError(key + ": expected an integer, got '" + value + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) throw ConfigError(key + ": expected a number, got '" + value + "'");
    return v;
}

bool parse_flag(const std::string& key, const std::string& value) {
    if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
    if (value == "0" || value == "false" || value == "no" || value == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + value + "'");
}

std::string join(const std::vector<int>& xs) {
    std::string s;
    for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? "," : "") + std::to_string(xs[k]);
    return s;
}

const std::vector<std::string>& known_methods() {
    static const std::vector<std::string> m{"cd", "qubo-best", "qubo-avg", "exact", "none", "bn-relu"};
    return m;
}

bool pretrains(const std::string& method) { return method != "none" && method != "bn-relu"; }

}  // namespace

const ConfigMap& default_config() {
    static const ConfigMap defaults{
        {"experiment", "minibatch_sweep"},
        {"samplers", "auto"},
        {"pretrain_iters", "1..50"},
        {"backprop_iters", "auto"},
        {"minibatch", "auto"},
        {"pretrain_minibatch", "0"},
        {"seeds", "1..10"},
        {"hidden", "32,32"},
        {"learning_rate", "0.1"},
        {"loss_reduction", "sum"},
        {"momentum_initial", "0.1"},
        {"momentum_final", "0.5"},
        {"momentum_switch", "5"},
        {"cd_k", "1"},
        {"restart_patience", "28"},
        {"max_flips", "0"},
        {"noise", "0.1"},
        {"record_stride", "1"},
        {"solver_backend", "sls"},
        {"propagation", "probabilities"},
        {"data_hidden", "probabilities"},
        {"train_images", "data/mnist5k-images-idx3-ubyte.gz"},
        {"train_labels", "data/mnist5k-labels-idx1-ubyte.gz"},
        {"test_images", ""},
        {"test_labels", ""},
        {"train_size", "2000"},
        {"test_size", "1000"},
        {"num_parts", "auto"},
        {"data_seed", "0"},
        {"trace_visible", "32"},
        {"trace_hidden", "32"},
        {"trace_stddev", "1"},
        {"timing", "0"},
    };
    return defaults;
}

ConfigMap parse_config_text(std::string_view text) {
    ConfigMap out;
    int line_no = 0;
    for (const std::string& raw : [&] {
             std::vector<std::string> lines;
             std::istringstream in{std::string(text)};
             for (std::string l; std::getline(in, l);) lines.push_back(l);
             return lines;
         }()) {
        ++line_no;
        const std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        }
        std::string key = trim(line.substr(0, eq));
        std::replace(key.begin(), key.end(), '-', '_');
        if (!default_config().contains(key)) {
            throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

ConfigMap merge_config(const ConfigMap& base, const ConfigMap& overrides) {
    ConfigMap out = base;
    for (const auto& [k, v] : overrides) {
        if (!default_config().contains(k)) throw ConfigError("unknown config key '" + k + "'");
        out[k] = v;
    }
    return out;
}

std::vector<int> parse_int_list(std::string_view text) {
    std::vector<int> out;
    for (const std::string& item : split(text, ',')) {
        const auto dots = item.find("..");
        if (dots == std::string::npos) {
            out.push_back(static_cast<int>(parse_integer("list", item)));
            continue;
        }
        const auto lo = static_cast<int>(parse_integer("list", trim(item.substr(0, dots))));
        const auto hi = static_cast<int>(parse_integer("list", trim(item.substr(dots + 2))));
        if (hi < lo) throw ConfigError("empty range '" + item + "'");
        for (int v = lo; v <= hi; ++v) out.push_back(v);
    }
    return out;
}

ExperimentConfig ExperimentConfig::from_map(const ConfigMap& input) {
    ConfigMap map = merge_config(default_config(), input);
    ExperimentConfig cfg;
    auto get = [&](const char* key) { return map.at(key); };
    auto integer = [&](const char* key) { return parse_integer(key, get(key)); };
    auto real = [&](const char* key) { return parse_real(key, get(key)); };

    const std::string exp = get("experiment");
    if (exp == "minibatch_sweep") {
        cfg.experiment = Experiment::minibatch_sweep;
    } else if (exp == "fullbatch_sweep") {
        cfg.experiment = Experiment::fullbatch_sweep;
    } else if (exp == "bn_relu_comparison") {
        cfg.experiment = Experiment::bn_relu_comparison;
    } else if (exp == "solver_trace") {
        cfg.experiment = Experiment::solver_trace;
    } else {
        throw ConfigError("experiment: unknown value '" + exp + "'");
    }

    if (get("samplers") == "auto") {
        map["samplers"] = cfg.experiment == Experiment::bn_relu_comparison ? "qubo-best,bn-relu" : "cd,qubo-best";
    }
    if (get("backprop_iters") == "auto") {
        map["backprop_iters"] = cfg.experiment == Experiment::fullbatch_sweep ? "100,500,800" : "100,200,400";
    }
    if (get("minibatch") == "auto") {
        map["minibatch"] = cfg.experiment == Experiment::fullbatch_sweep ? "0" : "100";
    }

    cfg.methods = split(get("samplers"), ',');
    if (cfg.methods.empty()) throw ConfigError("samplers: at least one method is required");
    for (const auto& m : cfg.methods) {
        if (std::find(known_methods().begin(), known_methods().end(), m) == known_methods().end()) {
            throw ConfigError("samplers: unknown method '" + m + "'");
        }
    }
    cfg.pretrain_iters = parse_int_list(get("pretrain_iters"));
    cfg.backprop_iters = parse_int_list(get("backprop_iters"));
    std::sort(cfg.backprop_iters.begin(), cfg.backprop_iters.end());
    cfg.backprop_iters.erase(std::unique(cfg.backprop_iters.begin(), cfg.backprop_iters.end()),
                             cfg.backprop_iters.end());
    for (const auto& [name, list] : {std::pair{"pretrain_iters", &cfg.pretrain_iters},
                                     std::pair{"backprop_iters", &cfg.backprop_iters}}) {
        if (list->empty()) throw ConfigError(std::string(name) + ": empty list");
        if (*std::min_element(list->begin(), list->end()) < 0) {
            throw ConfigError(std::string(name) + ": values must be >= 0");
        }
    }
    for (int s : parse_int_list(get("seeds"))) {
        if (s < 0) throw ConfigError("seeds must be non-negative");
        cfg.seeds.push_back(static_cast<std::uint64_t>(s));
    }
    if (cfg.seeds.empty()) throw ConfigError("seeds: at least one seed is required");
    cfg.hidden_sizes = parse_int_list(get("hidden"));
    if (cfg.hidden_sizes.empty() ||
        *std::min_element(cfg.hidden_sizes.begin(), cfg.hidden_sizes.end()) < 1) {
        throw ConfigError("hidden: need at least one positive layer size");
    }

    cfg.backprop_minibatch = static_cast<int>(integer("minibatch"));
    const double lr = real("learning_rate");
    const MomentumSchedule schedule{{{static_cast<int>(integer("momentum_switch")), real("momentum_initial")},
                                     {std::numeric_limits<int>::max(), real("momentum_final")}}};
    cfg.pretrain.learning_rate = lr;
    cfg.pretrain.momentum = schedule;
    if (const auto pmb = integer("pretrain_minibatch"); pmb > 0) cfg.pretrain.mini_batch = static_cast<int>(pmb);
    const std::string dh = get("data_hidden");
    if (dh != "probabilities" && dh != "samples") throw ConfigError("data_hidden: probabilities or samples");
    cfg.pretrain.data_hidden = dh == "samples" ? HiddenStatistic::samples : HiddenStatistic::probabilities;
    cfg.pretrain.sampler.cd_k = static_cast<int>(integer("cd_k"));
    SolverConfig& solver = cfg.pretrain.sampler.solver;
    solver.restart_patience = static_cast<int>(integer("restart_patience"));
    solver.max_flips_per_restart = integer("max_flips");
    solver.noise = real("noise");
    solver.record_stride = static_cast<int>(integer("record_stride"));
    const std::string backend = get("solver_backend");
    if (backend == "sls") {
        cfg.pretrain.sampler.backend = SolverBackend::sls;
    } else if (backend == "exact") {
        cfg.pretrain.sampler.backend = SolverBackend::exact_bipartite;
    } else {
        throw ConfigError("solver_backend: sls or exact");
    }
    const std::string prop = get("propagation");
    if (prop != "probabilities" && prop != "samples") throw ConfigError("propagation: probabilities or samples");
    cfg.propagation = prop == "samples" ? Propagation::samples : Propagation::probabilities;

    cfg.supervised.learning_rate = lr;
    cfg.supervised.momentum = schedule;
    cfg.supervised.mini_batch = cfg.backprop_minibatch;
    const std::string reduction = get("loss_reduction");
    if (reduction != "mean" && reduction != "sum") throw ConfigError("loss_reduction: mean or sum");
    cfg.supervised.reduction = reduction == "sum" ? LossReduction::sum : LossReduction::mean;

    cfg.train_images = get("train_images");
    cfg.train_labels = get("train_labels");
    cfg.test_images = get("test_images");
    cfg.test_labels = get("test_labels");
    if (cfg.test_images.empty() != cfg.test_labels.empty()) {
        throw ConfigError("test_images and test_labels must be given together");
    }
    const auto train_size = integer("train_size");
    const auto test_size = integer("test_size");
    if (train_size < 1 || test_size < 1) throw ConfigError("train_size and test_size must be >= 1");
    cfg.train_size = static_cast<std::size_t>(train_size);
    cfg.test_size = static_cast<std::size_t>(test_size);
    cfg.num_parts = get("num_parts") == "auto" ? 0 : static_cast<int>(integer("num_parts"));
    if (cfg.num_parts < 0) throw ConfigError("num_parts must be >= 0");
    cfg.data_seed = static_cast<std::uint64_t>(integer("data_seed"));
    cfg.trace_visible = static_cast<int>(integer("trace_visible"));
    cfg.trace_hidden = static_cast<int>(integer("trace_hidden"));
    cfg.trace_stddev = real("trace_stddev");
    cfg.timing = parse_flag("timing", get("timing"));

    cfg.pretrain.validate();
    cfg.supervised.validate();
    map["pretrain_iters"] = join(cfg.pretrain_iters);
    map["backprop_iters"] = join(cfg.backprop_iters);
    cfg.source = std::move(map);
    return cfg;
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
    const LabeledImages train = load_labeled_images(cfg.train_images, cfg.train_labels);
    LabeledImages pool;
    PreparedData out;
    if (cfg.test_images.empty()) {
        if (cfg.test_size >= train.size()) throw ArgumentError("test_size leaves no training images");
        const auto idx = shuffled_indices(train.size(), cfg.data_seed);
        const std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.test_size));
        const std::vector<std::size_t> pool_idx(idx.begin() + static_cast<std::ptrdiff_t>(cfg.test_size), idx.end());
        out.test = reduce_dataset(train.subset(test_idx));
        pool = train.subset(pool_idx);
    } else {
        const LabeledImages test = load_labeled_images(cfg.test_images, cfg.test_labels);
        if (cfg.test_size > test.size()) throw ArgumentError("test_size exceeds the test file");
        const auto idx = shuffled_indices(test.size(), cfg.data_seed);
        const std::vector<std::size_t> test_idx(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cfg.test_size));
        out.test = reduce_dataset(test.subset(test_idx));
        pool = train;
    }
    int parts = cfg.num_parts;
    if (parts == 0) {
        parts = static_cast<int>(std::min<std::size_t>(cfg.seeds.size(), pool.size() / cfg.train_size));
        parts = std::max(parts, 1);
    }
    for (auto& p : partition(pool, {parts, cfg.train_size, cfg.data_seed + 1})) {
        out.partitions.push_back(reduce_dataset(p));
    }
    return out;
}

PretrainConfig pretrain_config_for(const ExperimentConfig& cfg, const std::string& method, int iterations) {
    PretrainConfig p = cfg.pretrain;
    p.iterations = pretrains(method) ? iterations : 0;
    if (method == "cd") {
        p.sampler.kind = SamplerKind::cd;
    } else if (method == "qubo-best") {
        p.sampler.kind = SamplerKind::qubo_best;
    } else if (method == "qubo-avg") {
        p.sampler.kind = SamplerKind::qubo_time_average;
    } else if (method == "exact") {
        p.sampler.kind = SamplerKind::exact_enumeration;
    } else if (pretrains(method)) {
        throw ConfigError("unknown method '" + method + "'");
    }
    p.validate();
    return p;
}

SupervisedConfig supervised_config_for(const ExperimentConfig& cfg, const std::string& method, int iterations) {
    SupervisedConfig s = cfg.supervised;
    s.iterations = iterations;
    if (method == "bn-relu") {
        s.activation = Activation::relu;
        s.batch_norm = true;
    }
    return s;
}

std::vector<ResultRow> run_cell(const ExperimentConfig& cfg, const PreparedData& data,
                                const std::string& method, int pretrain_iters, std::size_t seed_index) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = cfg.seeds.at(seed_index);
    const int part = static_cast<int>(seed_index % data.partitions.size());
    const LabeledImages& train = data.partitions[static_cast<std::size_t>(part)];

    std::vector<int> sizes{static_cast<int>(train.images.cols())};
    sizes.insert(sizes.end(), cfg.hidden_sizes.begin(), cfg.hidden_sizes.end());
    Rng init_rng = make_stream(seed, 1);
    DbnModel model = DbnModel::initialize(sizes, 10, init_rng);

    const PretrainConfig pcfg = pretrain_config_for(cfg, method, pretrain_iters);
    if (pcfg.iterations > 0) {
        Rng pre_rng = make_stream(seed, 2);
        model = pretrain_dbn(model, train.images, pcfg, pre_rng, cfg.propagation).model;
    }

    const int last = cfg.backprop_iters.back();
    const SupervisedConfig scfg = supervised_config_for(cfg, method, last);
    std::optional<BatchNormState> bn;
    if (scfg.batch_norm) bn = BatchNormState::for_model(model);

    std::vector<ResultRow> rows;
    auto emit = [&](int step, const DbnModel& m, const BatchNormState* b) {
        const double acc = evaluate(m, data.test.images, data.test.labels, scfg, b);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back({method, pcfg.iterations, step, seed, part, acc, secs});
    };
    if (cfg.backprop_iters.front() == 0) emit(0, model, bn ? &*bn : nullptr);
    Rng tune_rng = make_stream(seed, 3);
    fine_tune(model, train.images, train.labels, scfg, bn, tune_rng,
              [&](int step, const DbnModel& m, const BatchNormState* b) {
                  if (std::binary_search(cfg.backprop_iters.begin(), cfg.backprop_iters.end(), step)) {
                      emit(step, m, b);
                  }
              });
    return rows;
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg) {
    return run_experiment(cfg, prepare_data(cfg));
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& cfg, const PreparedData& data) {
    if (cfg.experiment == Experiment::solver_trace) {
        throw ConfigError("solver_trace is run with the trace command, not as a sweep");
    }
    std::vector<ResultRow> rows;
    for (const auto& method : cfg.methods) {
        // Methods without pretraining do not depend on N; run them once.
        const std::vector<int> ns = pretrains(method) ? cfg.pretrain_iters : std::vector<int>{0};
        for (int n : ns) {
            for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
                auto cell = run_cell(cfg, data, method, n, s);
                rows.insert(rows.end(), cell.begin(), cell.end());
            }
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        return std::tie(a.method, a.pretrain_iters, a.backprop_iters, a.seed) <
               std::tie(b.method, b.pretrain_iters, b.backprop_iters, b.seed);
    });
    return rows;
}

std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_config_header(std::ostream& out, const ConfigMap& map) {
    for (const auto& [k, v] : map) out << "# " << k << '=' << v << '\n';
}

void write_results_csv(std::ostream& out, const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
    write_config_header(out, cfg.source);
    out << "method,pretrain_iters,backprop_iters,seed,partition,accuracy";
    if (cfg.timing) out << ",wall_time_seconds";
    out << '\n';
    for (const auto& r : rows) {
        out << r.method << ',' << r.pretrain_iters << ',' << r.backprop_iters << ',' << r.seed << ','
            << r.partition << ',' << format_real(r.accuracy);
        if (cfg.timing) out << ',' << format_real(r.wall_time_seconds);
        out << '\n';
    }
}

SolveResult trace_solve(const ExperimentConfig& cfg) {
    if (cfg.trace_visible < 1 || cfg.trace_hidden < 1) throw ConfigError("trace sizes must be >= 1");
    if (cfg.trace_stddev < 0.0) throw ConfigError("trace_stddev must be >= 0");
    const std::uint64_t seed = cfg.seeds.front();
    Rng rng = make_stream(seed, 4);
    const RbmParams params = RbmParams::gaussian(cfg.trace_visible, cfg.trace_hidden, cfg.trace_stddev, rng);
    const QuboProblem q = rbm_to_qubo(params);
    SolverConfig solver = cfg.pretrain.sampler.solver;
    solver.seed = seed;
    return solve_sls(qubo_to_wcnf(q), solver);
}

void emit_trace(std::ostream& out, const ExperimentConfig& cfg) {
    const SolveResult r = trace_solve(cfg);
    write_config_header(out, cfg.source);
    out << "# best_weight=" << format_real(r.best_weight) << '\n';
    out << "# restarts_used=" << r.restarts_used << '\n';
    out << "flip_count,best_weight,is_restart\n";
    for (const auto& p : r.trace.points) {
        out << p.flip_count << ',' << format_real(p.best_weight) << ',' << (p.restart ? 1 : 0) << '\n';
    }
}

}  // namespace qubodbn
