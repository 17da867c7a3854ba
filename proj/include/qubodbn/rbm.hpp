#pragma once

#include <Eigen/Dense>

#include "qubodbn/random.hpp"

namespace qubodbn {

/// Parameters of one restricted Boltzmann machine layer.
///
/// `weights(i, j)` couples hidden unit i to visible unit j, so the matrix is
/// n_hidden x n_visible. Visible inputs may be real values in [0,1] (grayscale
/// pixels); every function below uses them as-is.
struct RbmParams {
    Eigen::MatrixXd weights;
    Eigen::VectorXd visible_bias;
    Eigen::VectorXd hidden_bias;

    [[nodiscard]] Eigen::Index num_visible() const { return visible_bias.size(); }
    [[nodiscard]] Eigen::Index num_hidden() const { return hidden_bias.size(); }

    static RbmParams zeros(Eigen::Index num_visible, Eigen::Index num_hidden);
    /// Gaussian weights with the given standard deviation, zero biases.
    static RbmParams gaussian(Eigen::Index num_visible, Eigen::Index num_hidden, double stddev,
                              Rng& rng);

    /// Throws ShapeError when the three blocks disagree on the layer sizes.
    void check_shape() const;
    [[nodiscard]] bool all_finite() const;
};

struct BinaryState {
    Eigen::VectorXd v;
    Eigen::VectorXd h;
};

/// First and second moments <v_j h_i>, <v_j>, <h_i>; `vh` has the weight layout (n x m).
struct ExpectationStats {
    Eigen::MatrixXd vh;
    Eigen::VectorXd v;
    Eigen::VectorXd h;

    static ExpectationStats zeros(Eigen::Index num_visible, Eigen::Index num_hidden);
};

struct ExactModelStats {
    double partition_function = 0.0;
    double log_partition_function = 0.0;
    ExpectationStats stats;
};

/// Previous parameter increments; zero at the start of training.
struct MomentumState {
    Eigen::MatrixXd prev_dw;
    Eigen::VectorXd prev_db;
    Eigen::VectorXd prev_dc;

    static MomentumState zeros_like(const RbmParams& params);
};

/// Whether the hidden side of data statistics uses p(h=1|v) or a Bernoulli draw.
enum class HiddenStatistic { probabilities, samples };

// Largest m + n accepted by exact enumeration.
inline constexpr Eigen::Index kMaxEnumerationUnits = 24;

double sigmoid(double x);

double energy(const RbmParams& params, const Eigen::Ref<const Eigen::VectorXd>& v,
              const Eigen::Ref<const Eigen::VectorXd>& h);

Eigen::VectorXd hidden_conditional(const RbmParams& params,
                                   const Eigen::Ref<const Eigen::VectorXd>& v);
Eigen::VectorXd visible_conditional(const RbmParams& params,
                                    const Eigen::Ref<const Eigen::VectorXd>& h);

/// Row-wise p(h=1|v) for a batch whose rows are visible vectors.
Eigen::MatrixXd hidden_conditional_batch(const RbmParams& params, const Eigen::MatrixXd& batch);

Eigen::VectorXd sample_bernoulli(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng);

/// Positive-phase statistics. `batch` holds one visible vector per row.
/// `rng` is only consumed for HiddenStatistic::samples.
ExpectationStats data_expectation(const RbmParams& params, const Eigen::MatrixXd& batch,
                                  HiddenStatistic hidden = HiddenStatistic::probabilities,
                                  Rng* rng = nullptr);

struct CdEstimate {
    ExpectationStats data;
    ExpectationStats model;
};

/// CD-k: one Gibbs chain per data row, k alternating steps. Intermediate
/// layers are sampled; the final hidden layer contributes p(h=1|v_k).
CdEstimate cd_estimate(const RbmParams& params, const Eigen::MatrixXd& batch, int k, Rng& rng,
                       HiddenStatistic hidden = HiddenStatistic::probabilities);

/// Exact Z and model moments by enumerating all 2^(m+n) joint states.
ExactModelStats exact_model_expectation(const RbmParams& params);

/// Mean log p(v) over the rows of `batch`, using the exact partition function.
double mean_log_likelihood(const RbmParams& params, const Eigen::MatrixXd& batch);

struct UpdateResult {
    RbmParams params;
    MomentumState momentum;
};

/// Momentum gradient-ascent step: d <- alpha * d_prev + lr * (data - model).
UpdateResult apply_update(const RbmParams& params, const MomentumState& momentum,
                          const ExpectationStats& data, const ExpectationStats& model,
                          double learning_rate, double alpha);

}  // namespace qubodbn
