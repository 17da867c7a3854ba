#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "qubodbn/dbn.hpp"
#include "qubodbn/errors.hpp"

namespace qubodbn {

void SupervisedConfig::validate() const {
    if (iterations < 0) throw ConfigError("back-propagation iterations must be >= 0");
    if (mini_batch < 0) throw ConfigError("mini-batch must be >= 1 (or 0 for full batch)");
    if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be >= 0");
}

BatchNormState BatchNormState::for_model(const DbnModel& model) {
    BatchNormState bn;
    for (const auto& layer : model.layers) {
        const Eigen::Index n = layer.num_hidden();
        bn.layers.push_back({Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n),
                             Eigen::VectorXd::Zero(n), Eigen::VectorXd::Ones(n)});
    }
    return bn;
}

NetworkDelta NetworkDelta::zeros_like(const DbnModel& model, const BatchNormState* bn) {
    NetworkDelta d;
    for (const auto& layer : model.layers) {
        d.weights.push_back(Eigen::MatrixXd::Zero(layer.weights.rows(), layer.weights.cols()));
        d.biases.push_back(Eigen::VectorXd::Zero(layer.num_hidden()));
    }
    d.output_weights = Eigen::MatrixXd::Zero(model.output_weights.rows(), model.output_weights.cols());
    d.output_bias = Eigen::VectorXd::Zero(model.output_bias.size());
    if (bn != nullptr) {
        for (const auto& l : bn->layers) {
            d.gamma.push_back(Eigen::VectorXd::Zero(l.gamma.size()));
            d.beta.push_back(Eigen::VectorXd::Zero(l.beta.size()));
        }
    }
    return d;
}

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& y, Activation a) {
    if (a == Activation::sigmoid) return y.unaryExpr([](double x) { return sigmoid(x); });
    return y.cwiseMax(0.0);
}

Eigen::MatrixXd activation_derivative(const LayerCache& c, Activation a) {
    if (a == Activation::sigmoid) return c.output.array() * (1.0 - c.output.array());
    return (c.activation_input.array() > 0.0).cast<double>();
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p = logits;
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        const double mx = p.row(r).maxCoeff();
        p.row(r) = (p.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

void check_labels(const DbnModel& model, const Eigen::MatrixXd& batch, std::span<const int> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != batch.rows()) {
        throw ShapeError("label count " + std::to_string(labels.size()) + " does not match batch size " +
                         std::to_string(batch.rows()));
    }
    for (int l : labels) {
        if (l < 0 || l >= model.num_classes()) {
            throw DomainError("label " + std::to_string(l) + " outside 0.." +
                              std::to_string(model.num_classes() - 1));
        }
    }
}

}  // namespace

ForwardResult forward(const DbnModel& model, const Eigen::MatrixXd& batch,
                      const SupervisedConfig& cfg, const BatchNormState* bn, Mode mode) {
    model.validate();
    if (batch.cols() != model.input_size()) {
        throw ShapeError("input rows have " + std::to_string(batch.cols()) + " values, network expects " +
                         std::to_string(model.input_size()));
    }
    if (cfg.batch_norm) {
        if (bn == nullptr || bn->layers.size() != model.layers.size()) {
            throw ConfigError("batch norm enabled without a matching BatchNormState");
        }
        if (mode == Mode::train && batch.rows() < 2) {
            throw ConfigError("batch norm in train mode needs at least two samples per batch");
        }
    }

    ForwardResult out;
    Eigen::MatrixXd x = batch;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const RbmParams& layer = model.layers[l];
        LayerCache c;
        c.input = x;
        c.pre = x * layer.weights.transpose();
        c.pre.rowwise() += layer.hidden_bias.transpose();
        if (cfg.batch_norm) {
            const BatchNormLayer& b = bn->layers[l];
            if (mode == Mode::train) {
                c.mean = c.pre.colwise().mean().transpose();
                c.var = (c.pre.rowwise() - c.mean.transpose()).array().square().colwise().mean().transpose();
            } else {
                c.mean = b.running_mean;
                c.var = b.running_var;
            }
            const Eigen::RowVectorXd inv_std = (c.var.array() + bn->epsilon).rsqrt().matrix().transpose();
            c.normalized = (c.pre.rowwise() - c.mean.transpose()).array().rowwise() * inv_std.array();
            c.activation_input = (c.normalized.array().rowwise() * b.gamma.transpose().array()).rowwise() +
                                 b.beta.transpose().array();
        } else {
            c.activation_input = c.pre;
        }
        c.output = activate(c.activation_input, cfg.activation);
        x = c.output;
        out.layers.push_back(std::move(c));
    }
    out.logits = x * model.output_weights.transpose();
    out.logits.rowwise() += model.output_bias.transpose();
    out.probabilities = softmax_rows(out.logits);
    return out;
}

double cross_entropy(const Eigen::MatrixXd& probabilities, std::span<const int> labels) {
    if (static_cast<Eigen::Index>(labels.size()) != probabilities.rows() || labels.empty()) {
        throw ShapeError("cross entropy needs one label per row");
    }
    double total = 0.0;
    for (std::size_t r = 0; r < labels.size(); ++r) {
        total -= std::log(probabilities(static_cast<Eigen::Index>(r), labels[r]));
    }
    return total / static_cast<double>(labels.size());
}

LossAndGradient loss_and_gradient(const DbnModel& model, const Eigen::MatrixXd& batch,
                                  std::span<const int> labels, const SupervisedConfig& cfg,
                                  const BatchNormState* bn) {
    check_labels(model, batch, labels);
    LossAndGradient out;
    out.forward = forward(model, batch, cfg, bn, Mode::train);
    const ForwardResult& fw = out.forward;
    const Eigen::Index rows = batch.rows();
    const double inv_rows = 1.0 / static_cast<double>(rows);
    const double scale = cfg.reduction == LossReduction::mean ? inv_rows : 1.0;

    // log-softmax keeps the loss finite when a probability underflows
    double loss = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
        const double mx = fw.logits.row(r).maxCoeff();
        const double lse = mx + std::log((fw.logits.row(r).array() - mx).exp().sum());
        loss += lse - fw.logits(r, labels[static_cast<std::size_t>(r)]);
    }
    out.loss = loss * scale;

    NetworkDelta& g = out.gradient;
    g = NetworkDelta::zeros_like(model, cfg.batch_norm ? bn : nullptr);
    Eigen::MatrixXd d_logits = fw.probabilities;
    for (Eigen::Index r = 0; r < rows; ++r) d_logits(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
    d_logits *= scale;

    const Eigen::MatrixXd& top = fw.layers.empty() ? batch : fw.layers.back().output;
    g.output_weights = d_logits.transpose() * top;
    g.output_bias = d_logits.colwise().sum().transpose();
    Eigen::MatrixXd d_out = d_logits * model.output_weights;

    for (std::size_t l = model.layers.size(); l-- > 0;) {
        const LayerCache& c = fw.layers[l];
        const Eigen::MatrixXd d_act = d_out.cwiseProduct(activation_derivative(c, cfg.activation));
        Eigen::MatrixXd d_pre;
        if (cfg.batch_norm) {
            const BatchNormLayer& b = bn->layers[l];
            g.gamma[l] = d_act.cwiseProduct(c.normalized).colwise().sum().transpose();
            g.beta[l] = d_act.colwise().sum().transpose();
            const Eigen::MatrixXd d_norm = d_act.array().rowwise() * b.gamma.transpose().array();
            const Eigen::RowVectorXd sum_d = d_norm.colwise().sum();
            const Eigen::RowVectorXd sum_dx = d_norm.cwiseProduct(c.normalized).colwise().sum();
            const Eigen::RowVectorXd inv_std = (c.var.array() + bn->epsilon).rsqrt().matrix().transpose();
            Eigen::MatrixXd t = (d_norm * static_cast<double>(rows)).rowwise() - sum_d;
            t -= (c.normalized.array().rowwise() * sum_dx.array()).matrix();
            d_pre = (t.array().rowwise() * inv_std.array()).matrix() * inv_rows;
        } else {
            d_pre = d_act;
        }
        g.weights[l] = d_pre.transpose() * c.input;
        g.biases[l] = d_pre.colwise().sum().transpose();
        d_out = d_pre * model.layers[l].weights;
    }
    return out;
}

StepResult backprop_step(const DbnModel& model, const Eigen::MatrixXd& batch,
                         std::span<const int> labels, const SupervisedConfig& cfg,
                         const BatchNormState* bn, const NetworkDelta& momentum, int iteration) {
    cfg.validate();
    const LossAndGradient lg = loss_and_gradient(model, batch, labels, cfg, bn);
    const double alpha = cfg.momentum.at(iteration);
    const double lr = cfg.learning_rate;
    const NetworkDelta& g = lg.gradient;

    StepResult out{model, std::nullopt, momentum, lg.loss};
    NetworkDelta& d = out.momentum;
    if (d.weights.size() != model.layers.size() || (cfg.batch_norm && d.gamma.size() != model.layers.size())) {
        throw ShapeError("momentum state does not match the network");
    }
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        d.weights[l] = alpha * d.weights[l] - lr * g.weights[l];
        d.biases[l] = alpha * d.biases[l] - lr * g.biases[l];
        out.model.layers[l].weights += d.weights[l];
        out.model.layers[l].hidden_bias += d.biases[l];
    }
    d.output_weights = alpha * d.output_weights - lr * g.output_weights;
    d.output_bias = alpha * d.output_bias - lr * g.output_bias;
    out.model.output_weights += d.output_weights;
    out.model.output_bias += d.output_bias;

    if (bn != nullptr) out.bn = *bn;
    if (cfg.batch_norm) {
        BatchNormState& s = *out.bn;
        const double keep = s.running_momentum;
        for (std::size_t l = 0; l < s.layers.size(); ++l) {
            d.gamma[l] = alpha * d.gamma[l] - lr * g.gamma[l];
            d.beta[l] = alpha * d.beta[l] - lr * g.beta[l];
            s.layers[l].gamma += d.gamma[l];
            s.layers[l].beta += d.beta[l];
            const LayerCache& c = lg.forward.layers[l];
            s.layers[l].running_mean = keep * s.layers[l].running_mean + (1.0 - keep) * c.mean;
            s.layers[l].running_var = keep * s.layers[l].running_var + (1.0 - keep) * c.var;
        }
    }
    return out;
}

std::vector<int> predict(const DbnModel& model, const Eigen::MatrixXd& inputs,
                         const SupervisedConfig& cfg, const BatchNormState* bn) {
    const ForwardResult fw = forward(model, inputs, cfg, bn, Mode::inference);
    std::vector<int> out(static_cast<std::size_t>(inputs.rows()));
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
        Eigen::Index arg = 0;
        fw.probabilities.row(r).maxCoeff(&arg);
        out[static_cast<std::size_t>(r)] = static_cast<int>(arg);
    }
    return out;
}

double evaluate(const DbnModel& model, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                const SupervisedConfig& cfg, const BatchNormState* bn) {
    if (inputs.rows() == 0) throw ArgumentError("test set is empty");
    if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
        throw ShapeError("label count does not match test set size");
    }
    const std::vector<int> pred = predict(model, inputs, cfg, bn);
    std::size_t correct = 0;
    for (std::size_t k = 0; k < pred.size(); ++k) correct += pred[k] == labels[k] ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(pred.size());
}

FineTuneResult fine_tune(const DbnModel& model, const Eigen::MatrixXd& inputs,
                         std::span<const int> labels, const SupervisedConfig& cfg,
                         std::optional<BatchNormState> bn, Rng& rng,
                         const std::function<void(int, const DbnModel&, const BatchNormState*)>& on_step) {
    cfg.validate();
    if (inputs.rows() == 0) throw ArgumentError("training set is empty");
    if (static_cast<Eigen::Index>(labels.size()) != inputs.rows()) {
        throw ShapeError("label count does not match training set size");
    }
    if (cfg.batch_norm && !bn) bn = BatchNormState::for_model(model);

    FineTuneResult out{model, std::move(bn), {}};
    NetworkDelta momentum = NetworkDelta::zeros_like(model, out.bn ? &*out.bn : nullptr);
    const Eigen::Index rows = inputs.rows();
    const Eigen::Index size =
        cfg.mini_batch == 0 ? rows : std::min<Eigen::Index>(cfg.mini_batch, rows);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Eigen::Index cursor = rows;  // forces a shuffle before the first step

    Eigen::MatrixXd batch(size, inputs.cols());
    std::vector<int> batch_labels(static_cast<std::size_t>(size));
    for (int step = 1; step <= cfg.iterations; ++step) {
        if (cursor + size > rows) {
            if (size < rows) std::shuffle(order.begin(), order.end(), rng);
            cursor = 0;
        }
        for (Eigen::Index r = 0; r < size; ++r) {
            const Eigen::Index src = order[static_cast<std::size_t>(cursor + r)];
            batch.row(r) = inputs.row(src);
            batch_labels[static_cast<std::size_t>(r)] = labels[static_cast<std::size_t>(src)];
        }
        cursor += size;
        StepResult s = backprop_step(out.model, batch, batch_labels, cfg,
                                     out.bn ? &*out.bn : nullptr, momentum, step);
        out.model = std::move(s.model);
        out.bn = std::move(s.bn);
        momentum = std::move(s.momentum);
        out.losses.push_back(s.loss);
        if (on_step) on_step(step, out.model, out.bn ? &*out.bn : nullptr);
    }
    return out;
}

}  // namespace qubodbn
