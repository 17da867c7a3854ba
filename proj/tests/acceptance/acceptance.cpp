// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "../unit/test_util.hpp"
#include "qubodbn/data.hpp"
#include "qubodbn/dbn.hpp"
#include "qubodbn/errors.hpp"
#include "qubodbn/harness.hpp"
#include "qubodbn/maxsat.hpp"
#include "qubodbn/qubo.hpp"
#include "qubodbn/rbm.hpp"

using namespace qubodbn;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) {
    std::ostringstream s;
    s.precision(6);
    s << x;
    return s.str();
}

Assignment assignment_of(std::uint64_t code, int width) {
    const oracle::Bits b = oracle::bits_of(code, width);
    return {b.begin(), b.end()};
}

Outcome qubo_equivalence() {
    std::mt19937_64 gen(101);
    std::uniform_int_distribution<int> size(1, 5);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int m = size(gen);
        const int n = size(gen);
        const oracle::DenseRbm r = oracle::random_rbm(m, n, 1.0, gen);
        const RbmParams p = testutil::to_params(r);
        const QuboProblem q = rbm_to_qubo(p);
        for (std::uint64_t code = 0; code < (1ULL << (m + n)); ++code) {
            const Assignment x = assignment_of(code, m + n);
            const BinaryState s = split_assignment(q, x);
            worst = std::max(worst, std::abs(energy(p, s.v, s.h) - qubo_energy(q, x)));
            const oracle::Bits vb(x.begin(), x.begin() + m);
            const oracle::Bits hb(x.begin() + m, x.end());
            worst = std::max(worst, std::abs(oracle::energy(r, oracle::to_real(vb), oracle::to_real(hb)) -
                                             qubo_energy(q, x)));
        }
    }
    return {worst <= 1e-12, "max |energy - qubo_energy| = " + fmt(worst)};
}

Outcome wcnf_identity() {
    std::mt19937_64 gen(202);
    std::uniform_int_distribution<int> size(1, 10);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution keep(0.6);
    double worst = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int n = size(gen);
        QuboProblem q;
        q.num_vars = n;
        q.layout = {n, 0};
        oracle::DenseQubo d{n, std::vector<double>(static_cast<std::size_t>(n), 0.0),
                            std::vector<std::vector<double>>(static_cast<std::size_t>(n),
                                                             std::vector<double>(static_cast<std::size_t>(n), 0.0))};
        for (int k = 0; k < n; ++k) {
            const double c = keep(gen) ? normal(gen) : 0.0;
            q.linear.push_back(c);
            d.lin[static_cast<std::size_t>(k)] = c;
        }
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (!keep(gen)) continue;
                const double c = normal(gen);
                q.quadratic.push_back({i, j, c});
                d.quad[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = c;
            }
        }
        const WcnfFormula f = qubo_to_wcnf(q);
        for (std::uint64_t code = 0; code < (1ULL << n); ++code) {
            const Assignment x = assignment_of(code, n);
            const double lhs = unsat_weight(f, x) - f.offset;
            worst = std::max(worst, std::abs(lhs - qubo_energy(q, x)));
            worst = std::max(worst, std::abs(lhs - oracle::qubo_energy(d, oracle::Bits(x.begin(), x.end()))));
        }
    }
    return {worst <= 1e-9, "max |unsat - offset - energy| = " + fmt(worst)};
}

Outcome oracle_agreement() {
    std::mt19937_64 gen(303);
    std::uniform_int_distribution<int> size(1, 8);
    int mismatches = 0;
    for (int inst = 0; inst < 50; ++inst) {
        const int m = size(gen);
        const int n = size(gen);
        const QuboProblem q = rbm_to_qubo(testutil::to_params(oracle::random_rbm(m, n, 1.0, gen)));
        double best = std::numeric_limits<double>::infinity();
        for (std::uint64_t code = 0; code < (1ULL << (m + n)); ++code) {
            best = std::min(best, qubo_energy(q, assignment_of(code, m + n)));
        }
        const SolveResult r = solve_exact_bipartite(q);
        if (r.best_weight != best || qubo_energy(q, r.best_assignment) != best) ++mismatches;
    }
    return {mismatches == 0, std::to_string(50 - mismatches) + "/50 exact matches"};
}

Outcome solver_quality() {
    std::mt19937_64 gen(404);
    int hits = 0;
    int below = 0;
    for (int inst = 0; inst < 100; ++inst) {
        const QuboProblem q = rbm_to_qubo(testutil::to_params(oracle::random_rbm(8, 8, 1.0, gen)));
        const WcnfFormula f = qubo_to_wcnf(q);
        SolverConfig cfg;
        cfg.restart_patience = 28;
        cfg.seed = static_cast<std::uint64_t>(inst) + 1;
        const SolveResult sls = solve_sls(f, cfg);
        const SolveResult exact = solve_exact_bipartite(q, f.offset);
        if (sls.best_weight < exact.best_weight - 1e-9) ++below;
        if (std::abs(sls.best_weight - exact.best_weight) <= 1e-9) ++hits;
    }
    return {hits >= 95 && below == 0,
            std::to_string(hits) + "/100 optimal, " + std::to_string(below) + " below optimum"};
}

Outcome exact_gradient_pretraining() {
    Rng rng = make_stream(505);
    std::bernoulli_distribution bit(0.5);
    Eigen::MatrixXd data(20, 4);
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        for (Eigen::Index c = 0; c < 4; ++c) data(r, c) = bit(rng) ? 1.0 : 0.0;
    data.topRows(10).col(0).setOnes();
    data.topRows(10).col(1).setOnes();

    PretrainConfig cfg;
    cfg.iterations = 1;
    cfg.learning_rate = 0.05;
    cfg.momentum = MomentumSchedule::constant(0.0);
    cfg.sampler.kind = SamplerKind::exact_enumeration;

    RbmParams params = RbmParams::gaussian(4, 4, 0.1, rng);
    double prev = mean_log_likelihood(params, data);
    const double start = prev;
    double worst_drop = 0.0;
    for (int it = 0; it < 50; ++it) {
        params = pretrain_rbm(params, data, cfg, rng).params;
        const double ll = mean_log_likelihood(params, data);
        worst_drop = std::max(worst_drop, prev - ll);
        prev = ll;
    }
    return {worst_drop <= 1e-9,
            "log-likelihood " + fmt(start) + " -> " + fmt(prev) + ", largest drop " + fmt(worst_drop)};
}

Outcome gibbs_consistency() {
    double worst = 0.0;
    for (std::uint64_t net = 0; net < 3; ++net) {
        Rng rng = make_stream(606, net);
        const RbmParams p = RbmParams::gaussian(4, 4, 1.0, rng);
        std::bernoulli_distribution bit(0.5);
        Eigen::MatrixXd starts(10000, 4);
        for (Eigen::Index r = 0; r < starts.rows(); ++r)
            for (Eigen::Index c = 0; c < 4; ++c) starts(r, c) = bit(rng) ? 1.0 : 0.0;
        const CdEstimate cd = cd_estimate(p, starts, 500, rng);
        const ExactModelStats ex = exact_model_expectation(p);
        worst = std::max({worst, (cd.model.vh - ex.stats.vh).cwiseAbs().maxCoeff(),
                          (cd.model.v - ex.stats.v).cwiseAbs().maxCoeff(),
                          (cd.model.h - ex.stats.h).cwiseAbs().maxCoeff()});
    }
    return {worst <= 0.02, "max |CD-500 - exact| = " + fmt(worst) + " over 3 nets"};
}

// Largest relative error over one parameter block; entries whose analytic and
// numeric values are both below 1e-8 are compared absolutely (|diff| < 1e-7).
double block_error(double* data, Eigen::Index size, const double* analytic, const std::function<double()>& loss,
                   bool& ok) {
    constexpr double h = 1e-5;
    double worst = 0.0;
    for (Eigen::Index k = 0; k < size; ++k) {
        const double keep = data[k];
        data[k] = keep + h;
        const double up = loss();
        data[k] = keep - h;
        const double down = loss();
        data[k] = keep;
        const double numeric = (up - down) / (2.0 * h);
        const double diff = std::abs(analytic[k] - numeric);
        const double scale = std::abs(analytic[k]) + std::abs(numeric);
        if (scale < 1e-8) {
            ok = ok && diff < 1e-7;
            continue;
        }
        worst = std::max(worst, diff / scale);
    }
    return worst;
}

Outcome backprop_correctness() {
    std::string detail;
    bool all = true;
    for (Activation act : {Activation::sigmoid, Activation::relu}) {
        for (bool use_bn : {false, true}) {
            Rng rng = make_stream(707, use_bn ? 1 : 0);
            const std::vector<int> sizes{6, 4, 4};
            DbnModel model = DbnModel::initialize(sizes, 3, rng, 0.8);
            std::normal_distribution<double> normal(0.0, 0.5);
            for (auto& l : model.layers)
                for (Eigen::Index k = 0; k < l.hidden_bias.size(); ++k) l.hidden_bias[k] = normal(rng);
            for (Eigen::Index k = 0; k < 3; ++k) model.output_bias[k] = normal(rng);
            BatchNormState bn = BatchNormState::for_model(model);
            for (auto& l : bn.layers) {
                for (Eigen::Index k = 0; k < l.gamma.size(); ++k) {
                    l.gamma[k] = 1.0 + normal(rng);
                    l.beta[k] = normal(rng);
                }
            }
            Eigen::MatrixXd batch(5, 6);
            std::uniform_real_distribution<double> u(0.0, 1.0);
            for (Eigen::Index r = 0; r < 5; ++r)
                for (Eigen::Index c = 0; c < 6; ++c) batch(r, c) = u(rng);
            const std::vector<int> labels{0, 2, 1, 2, 0};

            SupervisedConfig cfg;
            cfg.activation = act;
            cfg.batch_norm = use_bn;
            const BatchNormState* bnp = use_bn ? &bn : nullptr;
            const NetworkDelta g = loss_and_gradient(model, batch, labels, cfg, bnp).gradient;
            auto loss = [&] { return loss_and_gradient(model, batch, labels, cfg, bnp).loss; };

            bool ok = true;
            double worst = 0.0;
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                auto& layer = model.layers[l];
                worst = std::max(worst, block_error(layer.weights.data(), layer.weights.size(), g.weights[l].data(), loss, ok));
                worst = std::max(worst, block_error(layer.hidden_bias.data(), layer.hidden_bias.size(), g.biases[l].data(), loss, ok));
                if (use_bn) {
                    worst = std::max(worst, block_error(bn.layers[l].gamma.data(), bn.layers[l].gamma.size(), g.gamma[l].data(), loss, ok));
                    worst = std::max(worst, block_error(bn.layers[l].beta.data(), bn.layers[l].beta.size(), g.beta[l].data(), loss, ok));
                }
            }
            worst = std::max(worst, block_error(model.output_weights.data(), model.output_weights.size(), g.output_weights.data(), loss, ok));
            worst = std::max(worst, block_error(model.output_bias.data(), model.output_bias.size(), g.output_bias.data(), loss, ok));
            ok = ok && worst < 1e-4;
            all = all && ok;
            detail += std::string(act == Activation::sigmoid ? "sigmoid" : "relu") + (use_bn ? "+bn" : "") + " " +
                      fmt(worst) + (ok ? "" : "(!)") + "; ";
        }
    }
    detail.resize(detail.size() - 2);
    return {all, "max rel err " + detail};
}

std::vector<std::uint8_t> idx_bytes(std::uint32_t magic, std::initializer_list<std::uint32_t> dims, std::size_t payload) {
    std::vector<std::uint8_t> out;
    auto be32 = [&](std::uint32_t v) {
        for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
    };
    be32(magic);
    for (auto d : dims) be32(d);
    for (std::size_t k = 0; k < payload; ++k) out.push_back(static_cast<std::uint8_t>(k));
    return out;
}

template <class E, class F>
bool throws(F&& f) {
    try {
        f();
    } catch (const E&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

Outcome data_pipeline() {
    std::vector<std::string> failures;
    auto check = [&](bool ok, const char* what) {
        if (!ok) failures.emplace_back(what);
    };

    const auto cells = reduced_cell_indices();
    std::vector<int> want;
    for (int k = 0; k < 36; ++k)
        if (k != 0 && k != 5 && k != 30 && k != 35) want.push_back(k);
    check(std::vector<int>(cells.begin(), cells.end()) == want, "retained index set");

    for (double c : {0.0, 0.7, 1.0, 0.123456789}) {
        const std::vector<double> img(784, c);
        const Eigen::VectorXd out = reduce_image(img);
        check(out.size() == 32 && (out.array() == c).all(), "constant preserved");
    }
    std::vector<double> block(784, 0.0);
    for (int r = 2; r < 6; ++r)
        for (int c = 6; c < 10; ++c) block[static_cast<std::size_t>(r * 28 + c)] = 1.0;
    const Eigen::VectorXd b = reduce_image(block);
    check(b[0] == 1.0 && b.tail(31).isZero(0.0), "block fixture");
    check(throws<ShapeError>([] { reduce_image(std::vector<double>(783, 0.0)); }), "wrong length");

    const IdxArray a = parse_idx(idx_bytes(0x00000803, {1, 2, 2}, 4));
    check(a.dims == std::vector<std::uint32_t>{1, 2, 2} && a.payload.size() == 4, "accept 1x2x2 fixture");
    check(parse_idx(idx_bytes(0x00000801, {3}, 3)).payload.size() == 3, "accept label fixture");
    check(throws<FormatError>([] { parse_idx(idx_bytes(0xDEADBEEF, {}, 0)); }), "bad magic");
    check(throws<TruncationError>([] { parse_idx(idx_bytes(0x00000803, {10, 28, 28}, 5 * 28 * 28)); }),
          "10 declared, 5 present");
    check(throws<UnsupportedError>([] { parse_idx(idx_bytes(0x00000701, {1}, 1)); }), "unsupported type");
    for (std::size_t payload : {0U, 3U, 5U, 8U}) {
        check(throws<FormatError>([&] { parse_idx(idx_bytes(0x00000803, {1, 2, 2}, payload)); }), "length mismatch");
    }
    if (failures.empty()) return {true, "retained set, constants, block fixture and IDX fixtures"};
    std::string d = "failed:";
    for (const auto& f : failures) d += " [" + f + "]";
    return {false, d};
}

ConfigMap data_paths() {
    return {{"train_images", QUBODBN_DATA_DIR "/mnist5k-images-idx3-ubyte.gz"},
            {"train_labels", QUBODBN_DATA_DIR "/mnist5k-labels-idx1-ubyte.gz"}};
}

Outcome trend_reproduction() {
    ConfigMap m = data_paths();
    m.insert({{"samplers", "cd,qubo-best"},
              {"pretrain_iters", "10"},
              {"backprop_iters", "100"},
              {"minibatch", "100"},
              {"seeds", "1,2,3"},
              {"hidden", "32,32"},
              {"train_size", "2000"},
              {"test_size", "1000"},
              {"num_parts", "1"}});
    const ExperimentConfig cfg = ExperimentConfig::from_map(m);
    const auto rows = run_experiment(cfg);
    std::map<std::string, std::vector<double>> acc;
    for (const auto& r : rows) acc[r.method].push_back(r.accuracy);
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    const double cd = mean(acc["cd"]);
    const double qb = mean(acc["qubo-best"]);
    std::string detail = "mean accuracy qubo-best " + fmt(qb) + " vs cd " + fmt(cd) + " (per seed qubo";
    for (double x : acc["qubo-best"]) detail += " " + fmt(x);
    detail += ", cd";
    for (double x : acc["cd"]) detail += " " + fmt(x);
    detail += ")";
    return {acc["cd"].size() == 3 && acc["qubo-best"].size() == 3 && qb >= cd, detail};
}

Outcome determinism() {
    ConfigMap m = data_paths();
    m.insert({{"samplers", "cd,qubo-best,qubo-avg,bn-relu"},
              {"pretrain_iters", "0,2"},
              {"backprop_iters", "5,10"},
              {"minibatch", "25"},
              {"seeds", "1,2"},
              {"hidden", "8,8"},
              {"train_size", "100"},
              {"test_size", "100"}});
    auto run = [&] {
        const ExperimentConfig cfg = ExperimentConfig::from_map(m);
        std::ostringstream out;
        write_results_csv(out, cfg, run_experiment(cfg));
        return out.str();
    };
    const std::string a = run();
    const std::string b = run();
    return {a == b && !a.empty(), std::to_string(a.size()) + " bytes, " + (a == b ? "identical" : "different")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
        {"QUBO equivalence", qubo_equivalence},
        {"WCNF identity", wcnf_identity},
        {"Oracle agreement", oracle_agreement},
        {"Solver quality", solver_quality},
        {"Exact-gradient pretraining", exact_gradient_pretraining},
        {"Gibbs consistency", gibbs_consistency},
        {"Backprop correctness", backprop_correctness},
        {"Data pipeline", data_pipeline},
        {"Trend reproduction", trend_reproduction},
        {"Determinism", determinism},
    };
    std::vector<int> only;
    for (int k = 1; k < argc; ++k) only.push_back(std::atoi(argv[k]));

    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %2d %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
