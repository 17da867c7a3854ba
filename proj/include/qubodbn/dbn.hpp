#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qubodbn/maxsat.hpp"
#include "qubodbn/rbm.hpp"

namespace qubodbn {

/// Piecewise-constant momentum: entry (t, a) applies to iterations up to and
/// including t. Iterations past the last entry keep its value.
struct MomentumSchedule {
    std::vector<std::pair<int, double>> entries{{5, 0.1}, {std::numeric_limits<int>::max(), 0.5}};

    [[nodiscard]] double at(int iteration) const;
    static MomentumSchedule constant(double alpha) { return {{{std::numeric_limits<int>::max(), alpha}}}; }
};

enum class SamplerKind { cd, qubo_best, qubo_time_average, exact_enumeration };

struct SamplerConfig {
    SamplerKind kind = SamplerKind::cd;
    int cd_k = 1;
    SolverBackend backend = SolverBackend::sls;
    SolverConfig solver;  // seed is replaced per solve from the training stream
};

struct PretrainConfig {
    int iterations = 0;
    SamplerConfig sampler;
    double learning_rate = 0.1;
    MomentumSchedule momentum;
    std::optional<int> mini_batch;  // empty: full batch
    HiddenStatistic data_hidden = HiddenStatistic::probabilities;

    void validate() const;
};

struct PretrainLogEntry {
    int iteration = 0;
    double alpha = 0.0;
    double reconstruction_error = 0.0;
    std::optional<double> solve_weight;  // last solve of the iteration, QUBO samplers only
    int restarts = 0;
};

struct PretrainResult {
    RbmParams params;
    std::vector<PretrainLogEntry> log;
};

/// Layer-2+ pretraining input: hidden probabilities of the layer below, or samples of them.
enum class Propagation { probabilities, samples };

struct DbnModel {
    std::vector<RbmParams> layers;
    Eigen::MatrixXd output_weights;  // classes x top hidden size
    Eigen::VectorXd output_bias;

    /// sizes = {input, hidden_1, ..., hidden_L}. Gaussian(0, stddev) weights, zero biases.
    static DbnModel initialize(std::span<const int> sizes, int num_classes, Rng& rng,
                               double stddev = 0.01);

    [[nodiscard]] Eigen::Index input_size() const;
    [[nodiscard]] Eigen::Index num_classes() const { return output_bias.size(); }
    void validate() const;
};

/// Mean squared error of the one-step mean-field reconstruction of `data`.
double reconstruction_error(const RbmParams& params, const Eigen::MatrixXd& data);

PretrainResult pretrain_rbm(const RbmParams& params, const Eigen::MatrixXd& data,
                            const PretrainConfig& cfg, Rng& rng);

struct DbnPretrainResult {
    DbnModel model;
    std::vector<std::vector<PretrainLogEntry>> logs;  // one per layer
};

/// Greedy layer-wise pretraining; the output layer is left untouched.
DbnPretrainResult pretrain_dbn(const DbnModel& model, const Eigen::MatrixXd& data,
                               const PretrainConfig& cfg, Rng& rng,
                               Propagation propagation = Propagation::probabilities);

// ---------------------------------------------------------------------------
// Supervised fine-tuning

enum class Activation { sigmoid, relu };
enum class Mode { train, inference };

/// How per-example cross-entropy terms combine into the batch loss.
enum class LossReduction { mean, sum };

struct SupervisedConfig {
    int iterations = 0;  // mini-batch updates
    int mini_batch = 100;  // 0: full batch
    Activation activation = Activation::sigmoid;
    bool batch_norm = false;
    double learning_rate = 0.1;
    MomentumSchedule momentum;
    LossReduction reduction = LossReduction::sum;

    void validate() const;
};

struct BatchNormLayer {
    Eigen::VectorXd gamma;
    Eigen::VectorXd beta;
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
};

struct BatchNormState {
    std::vector<BatchNormLayer> layers;
    double epsilon = 1e-5;
    double running_momentum = 0.9;

    /// gamma = 1, beta = 0, running mean 0, running variance 1 for each hidden layer.
    static BatchNormState for_model(const DbnModel& model);
};

struct LayerCache {
    Eigen::MatrixXd input;       // batch x fan_in
    Eigen::MatrixXd pre;         // affine output
    Eigen::MatrixXd normalized;  // BN x-hat; empty without BN
    Eigen::MatrixXd activation_input;
    Eigen::MatrixXd output;
    Eigen::VectorXd mean;
    Eigen::VectorXd var;
};

struct ForwardResult {
    Eigen::MatrixXd probabilities;  // batch x classes
    Eigen::MatrixXd logits;
    std::vector<LayerCache> layers;
};

ForwardResult forward(const DbnModel& model, const Eigen::MatrixXd& batch,
                      const SupervisedConfig& cfg, const BatchNormState* bn, Mode mode);

/// Parameter-shaped container used both for gradients and for momentum increments.
struct NetworkDelta {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    Eigen::MatrixXd output_weights;
    Eigen::VectorXd output_bias;
    std::vector<Eigen::VectorXd> gamma;
    std::vector<Eigen::VectorXd> beta;

    static NetworkDelta zeros_like(const DbnModel& model, const BatchNormState* bn);
};

struct LossAndGradient {
    double loss = 0.0;
    NetworkDelta gradient;
    ForwardResult forward;
};

/// Mean softmax cross-entropy over the batch.
double cross_entropy(const Eigen::MatrixXd& probabilities, std::span<const int> labels);

/// Train-mode loss (summed or averaged over the batch per cfg.reduction) and its
/// exact gradient with respect to every parameter.
LossAndGradient loss_and_gradient(const DbnModel& model, const Eigen::MatrixXd& batch,
                                  std::span<const int> labels, const SupervisedConfig& cfg,
                                  const BatchNormState* bn);

struct StepResult {
    DbnModel model;
    std::optional<BatchNormState> bn;
    NetworkDelta momentum;
    double loss = 0.0;
};

/// One descent step with momentum; `iteration` (1-based) selects alpha.
StepResult backprop_step(const DbnModel& model, const Eigen::MatrixXd& batch,
                         std::span<const int> labels, const SupervisedConfig& cfg,
                         const BatchNormState* bn, const NetworkDelta& momentum, int iteration);

/// Argmax predictions with inference-mode batch norm.
std::vector<int> predict(const DbnModel& model, const Eigen::MatrixXd& inputs,
                         const SupervisedConfig& cfg, const BatchNormState* bn);

double evaluate(const DbnModel& model, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                const SupervisedConfig& cfg, const BatchNormState* bn);

struct FineTuneResult {
    DbnModel model;
    std::optional<BatchNormState> bn;
    std::vector<double> losses;
};

/// Runs cfg.iterations mini-batch steps, reshuffling each epoch. `on_step` is
/// called after every step with the 1-based step count and the current state.
FineTuneResult fine_tune(const DbnModel& model, const Eigen::MatrixXd& inputs,
                         std::span<const int> labels, const SupervisedConfig& cfg,
                         std::optional<BatchNormState> bn, Rng& rng,
                         const std::function<void(int, const DbnModel&, const BatchNormState*)>&
                             on_step = {});

}  // namespace qubodbn
