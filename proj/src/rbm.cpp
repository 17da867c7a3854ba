#include "qubodbn/rbm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "qubodbn/errors.hpp"

namespace qubodbn {

namespace {

void require_length(Eigen::Index got, Eigen::Index want, const char* what) {
    if (got != want) {
        throw ShapeError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
    }
}

void require_batch(const RbmParams& params, const Eigen::MatrixXd& batch) {
    if (batch.rows() == 0) throw ArgumentError("batch is empty");
    require_length(batch.cols(), params.num_visible(), "batch row");
    if (!((batch.array() >= 0.0) && (batch.array() <= 1.0)).all()) {
        throw DomainError("batch entries must lie in [0,1]");
    }
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

}  // namespace

RbmParams RbmParams::zeros(Eigen::Index num_visible, Eigen::Index num_hidden) {
    return {Eigen::MatrixXd::Zero(num_hidden, num_visible), Eigen::VectorXd::Zero(num_visible),
            Eigen::VectorXd::Zero(num_hidden)};
}

RbmParams RbmParams::gaussian(Eigen::Index num_visible, Eigen::Index num_hidden, double stddev,
                              Rng& rng) {
    RbmParams p = zeros(num_visible, num_hidden);
    std::normal_distribution<double> normal(0.0, stddev);
    // Filled row by row so the draw order does not depend on Eigen's storage order.
    for (Eigen::Index i = 0; i < num_hidden; ++i) {
        for (Eigen::Index j = 0; j < num_visible; ++j) p.weights(i, j) = normal(rng);
    }
    return p;
}

void RbmParams::check_shape() const {
    if (weights.rows() != hidden_bias.size() || weights.cols() != visible_bias.size()) {
        throw ShapeError("RBM weights are " + std::to_string(weights.rows()) + "x" +
                         std::to_string(weights.cols()) + " but biases give " +
                         std::to_string(hidden_bias.size()) + "x" +
                         std::to_string(visible_bias.size()));
    }
}

bool RbmParams::all_finite() const {
    return weights.allFinite() && visible_bias.allFinite() && hidden_bias.allFinite();
}

ExpectationStats ExpectationStats::zeros(Eigen::Index num_visible, Eigen::Index num_hidden) {
    return {Eigen::MatrixXd::Zero(num_hidden, num_visible), Eigen::VectorXd::Zero(num_visible),
            Eigen::VectorXd::Zero(num_hidden)};
}

MomentumState MomentumState::zeros_like(const RbmParams& params) {
    return {Eigen::MatrixXd::Zero(params.weights.rows(), params.weights.cols()),
            Eigen::VectorXd::Zero(params.num_visible()), Eigen::VectorXd::Zero(params.num_hidden())};
}

double sigmoid(double x) { return 0.5 * (1.0 + std::tanh(0.5 * x)); }

double energy(const RbmParams& params, const Eigen::Ref<const Eigen::VectorXd>& v,
              const Eigen::Ref<const Eigen::VectorXd>& h) {
    params.check_shape();
    require_length(v.size(), params.num_visible(), "visible vector");
    require_length(h.size(), params.num_hidden(), "hidden vector");
    return -h.dot(params.weights * v) - params.visible_bias.dot(v) - params.hidden_bias.dot(h);
}

Eigen::VectorXd hidden_conditional(const RbmParams& params,
                                   const Eigen::Ref<const Eigen::VectorXd>& v) {
    params.check_shape();
    require_length(v.size(), params.num_visible(), "visible vector");
    Eigen::VectorXd a = params.weights * v + params.hidden_bias;
    return a.unaryExpr([](double x) { return sigmoid(x); });
}

Eigen::VectorXd visible_conditional(const RbmParams& params,
                                    const Eigen::Ref<const Eigen::VectorXd>& h) {
    params.check_shape();
    require_length(h.size(), params.num_hidden(), "hidden vector");
    Eigen::VectorXd a = params.weights.transpose() * h + params.visible_bias;
    return a.unaryExpr([](double x) { return sigmoid(x); });
}

Eigen::MatrixXd hidden_conditional_batch(const RbmParams& params, const Eigen::MatrixXd& batch) {
    params.check_shape();
    require_length(batch.cols(), params.num_visible(), "batch row");
    Eigen::MatrixXd a = batch * params.weights.transpose();
    a.rowwise() += params.hidden_bias.transpose();
    return a.unaryExpr([](double x) { return sigmoid(x); });
}

Eigen::VectorXd sample_bernoulli(const Eigen::Ref<const Eigen::VectorXd>& probs, Rng& rng) {
    Eigen::VectorXd bits(probs.size());
    for (Eigen::Index k = 0; k < probs.size(); ++k) {
        const double p = probs[k];
        if (!(p >= 0.0 && p <= 1.0)) {
            throw DomainError("probability " + std::to_string(p) + " outside [0,1]");
        }
        bits[k] = uniform01(rng) < p ? 1.0 : 0.0;
    }
    return bits;
}

ExpectationStats data_expectation(const RbmParams& params, const Eigen::MatrixXd& batch,
                                  HiddenStatistic hidden, Rng* rng) {
    params.check_shape();
    require_batch(params, batch);
    Eigen::MatrixXd hid = hidden_conditional_batch(params, batch);
    if (hidden == HiddenStatistic::samples) {
        if (rng == nullptr) throw ConfigError("sampled hidden statistics need a random stream");
        for (Eigen::Index r = 0; r < hid.rows(); ++r) {
            hid.row(r) = sample_bernoulli(hid.row(r).transpose(), *rng).transpose();
        }
    }
    const double inv = 1.0 / static_cast<double>(batch.rows());
    ExpectationStats s;
    s.vh = hid.transpose() * batch * inv;
    s.v = batch.colwise().sum().transpose() * inv;
    s.h = hid.colwise().sum().transpose() * inv;
    return s;
}

CdEstimate cd_estimate(const RbmParams& params, const Eigen::MatrixXd& batch, int k, Rng& rng,
                       HiddenStatistic hidden) {
    if (k < 1) throw ArgumentError("CD-k needs k >= 1");
    CdEstimate out;
    out.data = data_expectation(params, batch, hidden, &rng);

    const Eigen::Index rows = batch.rows();
    Eigen::MatrixXd final_v(rows, params.num_visible());
    Eigen::MatrixXd final_h(rows, params.num_hidden());
    for (Eigen::Index r = 0; r < rows; ++r) {
        Eigen::VectorXd h = sample_bernoulli(hidden_conditional(params, batch.row(r).transpose()), rng);
        Eigen::VectorXd v;
        Eigen::VectorXd ph;
        for (int step = 1; step <= k; ++step) {
            v = sample_bernoulli(visible_conditional(params, h), rng);
            ph = hidden_conditional(params, v);
            if (step < k) h = sample_bernoulli(ph, rng);
        }
        final_v.row(r) = v.transpose();
        final_h.row(r) = ph.transpose();
    }
    const double inv = 1.0 / static_cast<double>(rows);
    out.model.vh = final_h.transpose() * final_v * inv;
    out.model.v = final_v.colwise().sum().transpose() * inv;
    out.model.h = final_h.colwise().sum().transpose() * inv;
    return out;
}

ExactModelStats exact_model_expectation(const RbmParams& params) {
    params.check_shape();
    const Eigen::Index m = params.num_visible();
    const Eigen::Index n = params.num_hidden();
    if (m + n > kMaxEnumerationUnits) {
        throw CapacityError("exact enumeration limited to m + n <= " +
                            std::to_string(kMaxEnumerationUnits) + ", got " +
                            std::to_string(m + n));
    }
    const std::uint64_t nv = std::uint64_t{1} << m;
    const std::uint64_t nh = std::uint64_t{1} << n;

    auto unpack = [](std::uint64_t mask, Eigen::Index len) {
        Eigen::VectorXd x(len);
        for (Eigen::Index k = 0; k < len; ++k) x[k] = static_cast<double>((mask >> k) & 1U);
        return x;
    };
    // -E(v,h) = b.v + sum_i h_i a_i with a = W v + c
    auto neg_energy = [n](double bv, const Eigen::VectorXd& a, std::uint64_t hmask) {
        double s = bv;
        for (Eigen::Index i = 0; i < n; ++i) {
            if ((hmask >> i) & 1U) s += a[i];
        }
        return s;
    };

    double shift = -std::numeric_limits<double>::infinity();
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        const Eigen::VectorXd v = unpack(vm, m);
        const Eigen::VectorXd a = params.weights * v + params.hidden_bias;
        const double bv = params.visible_bias.dot(v);
        for (std::uint64_t hm = 0; hm < nh; ++hm) shift = std::max(shift, neg_energy(bv, a, hm));
    }

    ExactModelStats out;
    out.stats = ExpectationStats::zeros(m, n);
    double z = 0.0;
    for (std::uint64_t vm = 0; vm < nv; ++vm) {
        const Eigen::VectorXd v = unpack(vm, m);
        const Eigen::VectorXd a = params.weights * v + params.hidden_bias;
        const double bv = params.visible_bias.dot(v);
        double zv = 0.0;
        Eigen::VectorXd hsum = Eigen::VectorXd::Zero(n);
        for (std::uint64_t hm = 0; hm < nh; ++hm) {
            const double w = std::exp(neg_energy(bv, a, hm) - shift);
            zv += w;
            for (Eigen::Index i = 0; i < n; ++i) {
                if ((hm >> i) & 1U) hsum[i] += w;
            }
        }
        z += zv;
        out.stats.v += zv * v;
        out.stats.h += hsum;
        out.stats.vh += hsum * v.transpose();
    }
    out.stats.v /= z;
    out.stats.h /= z;
    out.stats.vh /= z;
    out.log_partition_function = shift + std::log(z);
    out.partition_function = std::exp(out.log_partition_function);
    return out;
}

double mean_log_likelihood(const RbmParams& params, const Eigen::MatrixXd& batch) {
    require_batch(params, batch);
    const double log_z = exact_model_expectation(params).log_partition_function;
    Eigen::MatrixXd a = batch * params.weights.transpose();
    a.rowwise() += params.hidden_bias.transpose();
    double total = 0.0;
    for (Eigen::Index r = 0; r < batch.rows(); ++r) {
        double lp = params.visible_bias.dot(batch.row(r).transpose());
        for (Eigen::Index i = 0; i < a.cols(); ++i) lp += softplus(a(r, i));
        total += lp - log_z;
    }
    return total / static_cast<double>(batch.rows());
}

UpdateResult apply_update(const RbmParams& params, const MomentumState& momentum,
                          const ExpectationStats& data, const ExpectationStats& model,
                          double learning_rate, double alpha) {
    params.check_shape();
    if (!(learning_rate >= 0.0)) throw ArgumentError("learning rate must be non-negative");
    if (!(alpha >= 0.0 && alpha < 1.0)) throw ArgumentError("momentum must lie in [0,1)");
    const auto same = [](const auto& a, const auto& b) {
        return a.rows() == b.rows() && a.cols() == b.cols();
    };
    for (const ExpectationStats* s : {&data, &model}) {
        if (!same(s->vh, params.weights) || !same(s->v, params.visible_bias) ||
            !same(s->h, params.hidden_bias)) {
            throw ShapeError("expectation statistics do not match the RBM shape");
        }
    }
    if (!same(momentum.prev_dw, params.weights) || !same(momentum.prev_db, params.visible_bias) ||
        !same(momentum.prev_dc, params.hidden_bias)) {
        throw ShapeError("momentum state does not match the RBM shape");
    }

    UpdateResult out;
    out.momentum.prev_dw = alpha * momentum.prev_dw + learning_rate * (data.vh - model.vh);
    out.momentum.prev_db = alpha * momentum.prev_db + learning_rate * (data.v - model.v);
    out.momentum.prev_dc = alpha * momentum.prev_dc + learning_rate * (data.h - model.h);
    out.params.weights = params.weights + out.momentum.prev_dw;
    out.params.visible_bias = params.visible_bias + out.momentum.prev_db;
    out.params.hidden_bias = params.hidden_bias + out.momentum.prev_dc;
    return out;
}

}  // namespace qubodbn
