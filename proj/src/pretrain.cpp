#include <algorithm>
#include <numeric>
#include <string>

#include "qubodbn/dbn.hpp"
#include "qubodbn/errors.hpp"
#include "qubodbn/qubo.hpp"

namespace qubodbn {

double MomentumSchedule::at(int iteration) const {
    if (entries.empty()) return 0.0;
    for (const auto& [through, alpha] : entries) {
        if (iteration <= through) return alpha;
    }
    return entries.back().second;
}

void PretrainConfig::validate() const {
    if (iterations < 0) throw ConfigError("pretraining iterations must be >= 0");
    if (!(learning_rate > 0.0)) throw ConfigError("pretraining learning rate must be > 0");
    if (mini_batch && *mini_batch < 1) throw ConfigError("pretraining mini-batch must be >= 1");
    if (sampler.kind == SamplerKind::cd && sampler.cd_k < 1) throw ConfigError("CD-k needs k >= 1");
    if (sampler.kind == SamplerKind::qubo_time_average &&
        sampler.backend != SolverBackend::sls) {
        throw ConfigError("time-average statistics need the local-search backend");
    }
    sampler.solver.validate();
}

DbnModel DbnModel::initialize(std::span<const int> sizes, int num_classes, Rng& rng,
                              double stddev) {
    if (sizes.size() < 2) throw ArgumentError("a DBN needs an input size and at least one hidden size");
    if (num_classes < 1) throw ArgumentError("need at least one output class");
    DbnModel model;
    for (std::size_t l = 1; l < sizes.size(); ++l) {
        model.layers.push_back(RbmParams::gaussian(sizes[l - 1], sizes[l], stddev, rng));
    }
    model.output_weights = Eigen::MatrixXd::Zero(num_classes, sizes.back());
    std::normal_distribution<double> normal(0.0, stddev);
    for (Eigen::Index r = 0; r < model.output_weights.rows(); ++r) {
        for (Eigen::Index c = 0; c < model.output_weights.cols(); ++c) model.output_weights(r, c) = normal(rng);
    }
    model.output_bias = Eigen::VectorXd::Zero(num_classes);
    return model;
}

Eigen::Index DbnModel::input_size() const {
    return layers.empty() ? output_weights.cols() : layers.front().num_visible();
}

void DbnModel::validate() const {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].check_shape();
        if (l > 0 && layers[l].num_visible() != layers[l - 1].num_hidden()) {
            throw ShapeError("layer " + std::to_string(l) + " visible size does not match the layer below");
        }
    }
    const Eigen::Index top = layers.empty() ? output_weights.cols() : layers.back().num_hidden();
    if (output_weights.cols() != top || output_weights.rows() != output_bias.size()) {
        throw ShapeError("output layer does not match the top hidden layer");
    }
}

double reconstruction_error(const RbmParams& params, const Eigen::MatrixXd& data) {
    const Eigen::MatrixXd hid = hidden_conditional_batch(params, data);
    Eigen::MatrixXd rec = hid * params.weights;
    rec.rowwise() += params.visible_bias.transpose();
    rec = rec.unaryExpr([](double x) { return sigmoid(x); });
    return (rec - data).squaredNorm() / static_cast<double>(data.size());
}

namespace {

struct ModelEstimate {
    ExpectationStats data;
    ExpectationStats model;
    std::optional<double> solve_weight;
    int restarts = 0;
};

ModelEstimate estimate(const RbmParams& params, const Eigen::MatrixXd& batch,
                       const PretrainConfig& cfg, Rng& rng) {
    ModelEstimate out;
    const SamplerConfig& s = cfg.sampler;
    if (s.kind == SamplerKind::cd) {
        CdEstimate cd = cd_estimate(params, batch, s.cd_k, rng, cfg.data_hidden);
        out.data = std::move(cd.data);
        out.model = std::move(cd.model);
        return out;
    }
    out.data = data_expectation(params, batch, cfg.data_hidden, &rng);
    if (s.kind == SamplerKind::exact_enumeration) {
        out.model = exact_model_expectation(params).stats;
        return out;
    }
    // Fig. 3 loop: RBM -> QUBO -> weighted MAX-SAT -> solver -> x* -> statistics.
    const QuboProblem q = rbm_to_qubo(params);
    const WcnfFormula f = qubo_to_wcnf(q);
    SolverConfig solver = s.solver;
    solver.seed = rng();
    const bool averaged = s.kind == SamplerKind::qubo_time_average;
    solver.record_assignments = solver.record_assignments || averaged;
    const SolveResult r = solve(q, f, s.backend, solver);
    out.model = model_stats_from_solve(q, r, averaged ? StatsMode::time_average : StatsMode::best);
    out.solve_weight = r.best_weight;
    out.restarts = r.restarts_used;
    return out;
}

}  // namespace

PretrainResult pretrain_rbm(const RbmParams& params, const Eigen::MatrixXd& data,
                            const PretrainConfig& cfg, Rng& rng) {
    cfg.validate();
    params.check_shape();
    if (data.cols() != params.num_visible()) {
        throw ShapeError("training rows have " + std::to_string(data.cols()) + " values, RBM has " +
                         std::to_string(params.num_visible()) + " visible units");
    }
    if (cfg.sampler.kind == SamplerKind::exact_enumeration &&
        params.num_visible() + params.num_hidden() > kMaxEnumerationUnits) {
        throw ConfigError("exact enumeration sampler limited to m + n <= " +
                          std::to_string(kMaxEnumerationUnits));
    }

    PretrainResult result{params, {}};
    MomentumState momentum = MomentumState::zeros_like(params);
    const Eigen::Index rows = data.rows();
    const Eigen::Index batch_size = cfg.mini_batch ? std::min<Eigen::Index>(*cfg.mini_batch, rows) : rows;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    for (int it = 1; it <= cfg.iterations; ++it) {
        const double alpha = cfg.momentum.at(it);
        if (cfg.mini_batch) std::shuffle(order.begin(), order.end(), rng);
        PretrainLogEntry entry{it, alpha, 0.0, std::nullopt, 0};
        for (Eigen::Index start = 0; start < rows; start += batch_size) {
            const Eigen::Index len = std::min(batch_size, rows - start);
            Eigen::MatrixXd batch(len, data.cols());
            for (Eigen::Index r = 0; r < len; ++r) batch.row(r) = data.row(order[static_cast<std::size_t>(start + r)]);

            ModelEstimate est = estimate(result.params, batch, cfg, rng);
            UpdateResult up = apply_update(result.params, momentum, est.data, est.model,
                                           cfg.learning_rate, alpha);
            if (!up.params.all_finite()) {
                throw DomainError("non-finite RBM parameters after iteration " + std::to_string(it));
            }
            result.params = std::move(up.params);
            momentum = std::move(up.momentum);
            entry.solve_weight = est.solve_weight;
            entry.restarts = est.restarts;
        }
        entry.reconstruction_error = reconstruction_error(result.params, data);
        result.log.push_back(entry);
    }
    return result;
}

DbnPretrainResult pretrain_dbn(const DbnModel& model, const Eigen::MatrixXd& data,
                               const PretrainConfig& cfg, Rng& rng, Propagation propagation) {
    model.validate();
    DbnPretrainResult out{model, {}};
    Eigen::MatrixXd inputs = data;
    for (auto& layer : out.model.layers) {
        PretrainResult r = pretrain_rbm(layer, inputs, cfg, rng);
        layer = std::move(r.params);
        out.logs.push_back(std::move(r.log));
        inputs = hidden_conditional_batch(layer, inputs);
        if (propagation == Propagation::samples) {
            for (Eigen::Index row = 0; row < inputs.rows(); ++row) {
                inputs.row(row) = sample_bernoulli(inputs.row(row).transpose(), rng).transpose();
            }
        }
    }
    return out;
}

}  // namespace qubodbn
