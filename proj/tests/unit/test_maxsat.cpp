#include <gtest/gtest.h>

#include <sstream>

#include "oracles.hpp"
#include "qubodbn/errors.hpp"
#include "qubodbn/maxsat.hpp"
#include "qubodbn/qubo.hpp"
#include "test_util.hpp"

using namespace qubodbn;
using testutil::to_params;

namespace {

// Single quadratic term c * x0 * x1 in the minimised energy, i.e. Q entry -c.
QuboProblem pair_qubo(double energy_coefficient) {
    QuboProblem q;
    q.num_vars = 2;
    q.layout = {1, 1};
    q.linear = {0.0, 0.0};
    q.quadratic = {{0, 1, -energy_coefficient}};
    return q;
}

// Random general QUBO (not necessarily bipartite) with the dense oracle copy.
std::pair<QuboProblem, oracle::DenseQubo> random_qubo(int n, std::mt19937_64& gen) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::bernoulli_distribution keep(0.6);
    QuboProblem q;
    q.num_vars = n;
    q.layout = {n, 0};
    oracle::DenseQubo d{n, std::vector<double>(static_cast<std::size_t>(n)),
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
    return {q, d};
}

QuboProblem random_rbm_qubo(int m, int n, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    return rbm_to_qubo(to_params(oracle::random_rbm(m, n, 1.0, gen)));
}

}  // namespace

TEST(QuboToWcnf, ZeroQubo) {
    const WcnfFormula f = qubo_to_wcnf(rbm_to_qubo(RbmParams::zeros(2, 3)));
    EXPECT_EQ(f.num_vars, 5);
    EXPECT_TRUE(f.clauses.empty());
    EXPECT_EQ(f.offset, 0.0);
}

TEST(QuboToWcnf, NegativePairHandCase) {
    const QuboProblem q = pair_qubo(-3.0);
    const WcnfFormula f = qubo_to_wcnf(q);
    ASSERT_EQ(f.clauses.size(), 2U);
    EXPECT_EQ(f.offset, 3.0);
    EXPECT_EQ(f.clauses[0].literals, (std::vector<Literal>{{0, true}}));
    EXPECT_EQ(f.clauses[0].weight, 3.0);
    EXPECT_EQ(f.clauses[1].literals, (std::vector<Literal>{{0, false}, {1, true}}));
    EXPECT_EQ(f.clauses[1].weight, 3.0);

    const std::vector<Assignment> xs{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    const std::vector<double> unsat{3, 3, 3, 0};
    const std::vector<double> energies{0, 0, 0, -3};
    for (std::size_t k = 0; k < xs.size(); ++k) {
        EXPECT_EQ(unsat_weight(f, xs[k]), unsat[k]);
        EXPECT_EQ(qubo_energy(q, xs[k]), energies[k]);
    }
}

TEST(QuboToWcnf, PositivePairAndLinearTerms) {
    QuboProblem q = pair_qubo(2.0);
    q.linear = {-1.5, 0.5};  // energy coefficients +1.5 and -0.5
    const WcnfFormula f = qubo_to_wcnf(q);
    EXPECT_DOUBLE_EQ(f.offset, 0.5);
    for (std::uint64_t code = 0; code < 4; ++code) {
        const Assignment x = oracle::bits_of(code, 2);
        EXPECT_NEAR(unsat_weight(f, x) - f.offset, qubo_energy(q, x), 1e-12);
    }
    for (const auto& c : f.clauses) EXPECT_GT(c.weight, 0.0);
}

TEST(QuboToWcnf, ExhaustiveIdentityAgainstDenseOracle) {
    std::mt19937_64 gen(77);
    std::uniform_int_distribution<int> size(1, 10);
    for (int trial = 0; trial < 100; ++trial) {
        const auto [q, dense] = random_qubo(size(gen), gen);
        const WcnfFormula f = qubo_to_wcnf(q);
        double negatives = 0.0;
        for (double c : q.linear) negatives += c > 0.0 ? c : 0.0;  // energy coefficient -c < 0
        for (const auto& t : q.quadratic) negatives += t.coefficient > 0.0 ? t.coefficient : 0.0;
        EXPECT_NEAR(f.offset, negatives, 1e-12);
        for (std::uint64_t code = 0; code < (1ULL << q.num_vars); ++code) {
            const Assignment x = oracle::bits_of(code, q.num_vars);
            const double w = unsat_weight(f, x);
            ASSERT_GE(w, -1e-12);
            ASSERT_NEAR(w - f.offset, oracle::qubo_energy(dense, x), 1e-9);
        }
        for (const auto& c : f.clauses) {
            ASSERT_GT(c.weight, 0.0);
            if (c.literals.size() == 2) ASSERT_NE(c.literals[0].var, c.literals[1].var);
        }
    }
}

TEST(UnsatWeight, TrivialCases) {
    WcnfFormula empty;
    empty.num_vars = 2;
    EXPECT_EQ(unsat_weight(empty, Assignment{0, 1}), 0.0);

    WcnfFormula unit;
    unit.num_vars = 1;
    unit.clauses = {{{{0, true}}, 2.0}};
    EXPECT_EQ(unsat_weight(unit, Assignment{0}), 2.0);
    EXPECT_EQ(unsat_weight(unit, Assignment{1}), 0.0);
    EXPECT_THROW(unsat_weight(unit, Assignment{0, 1}), ShapeError);
}

TEST(SolveSls, ZeroQuboStopsImmediately) {
    const WcnfFormula f = qubo_to_wcnf(rbm_to_qubo(RbmParams::zeros(3, 3)));
    const SolveResult r = solve_sls(f, SolverConfig{});
    EXPECT_EQ(r.best_weight, 0.0);
    EXPECT_EQ(r.restarts_used, 0);
    EXPECT_EQ(r.trace.points.size(), 1U);
}

TEST(SolveSls, NegativePairReachesOptimum) {
    const WcnfFormula f = qubo_to_wcnf(pair_qubo(-3.0));
    const SolveResult r = solve_sls(f, SolverConfig{});
    EXPECT_EQ(r.best_weight, 0.0);
    EXPECT_EQ(r.best_assignment, (Assignment{1, 1}));
}

TEST(SolveSls, TraceInvariantsAndRecomputedWeight) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const QuboProblem q = random_rbm_qubo(6, 7, 100 + seed);
        const WcnfFormula f = qubo_to_wcnf(q);
        SolverConfig cfg;
        cfg.seed = seed;
        cfg.restart_patience = 5;
        const SolveResult r = solve_sls(f, cfg);
        EXPECT_NEAR(unsat_weight(f, r.best_assignment), r.best_weight, 1e-9);
        EXPECT_EQ(static_cast<std::size_t>(r.restarts_used), r.trace.restart_markers.size());
        std::size_t restart_points = 0;
        double running = std::numeric_limits<double>::infinity();
        double segment = std::numeric_limits<double>::infinity();
        long last_flip = 0;
        for (const auto& p : r.trace.points) {
            EXPECT_GE(p.flip_count, last_flip);
            last_flip = p.flip_count;
            if (p.restart) {
                ++restart_points;
                segment = std::numeric_limits<double>::infinity();
            }
            EXPECT_LE(p.best_weight, segment + 1e-9);
            segment = p.best_weight;
            running = std::min(running, p.best_weight);
        }
        EXPECT_EQ(restart_points, r.trace.restart_markers.size());
        EXPECT_NEAR(running, r.best_weight, 1e-6);
    }
}

TEST(SolveSls, DeterministicGivenSeed) {
    const WcnfFormula f = qubo_to_wcnf(random_rbm_qubo(8, 8, 5));
    SolverConfig cfg;
    cfg.seed = 99;
    const SolveResult a = solve_sls(f, cfg);
    const SolveResult b = solve_sls(f, cfg);
    EXPECT_EQ(a.best_assignment, b.best_assignment);
    EXPECT_EQ(a.best_weight, b.best_weight);
    EXPECT_EQ(a.restarts_used, b.restarts_used);
    ASSERT_EQ(a.trace.points.size(), b.trace.points.size());
    for (std::size_t k = 0; k < a.trace.points.size(); ++k) {
        EXPECT_EQ(a.trace.points[k].flip_count, b.trace.points[k].flip_count);
        EXPECT_EQ(a.trace.points[k].best_weight, b.trace.points[k].best_weight);
    }
}

TEST(SolveSls, MatchesExactOptimumOnMostInstancesAndNeverBeatsIt) {
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const QuboProblem q = random_rbm_qubo(8, 8, 5000 + seed);
        const WcnfFormula f = qubo_to_wcnf(q);
        SolverConfig cfg;
        cfg.seed = seed;
        const SolveResult sls = solve_sls(f, cfg);
        const SolveResult exact = solve_exact_bipartite(q, f.offset);
        EXPECT_GE(sls.best_weight, exact.best_weight - 1e-9);
        if (std::abs(sls.best_weight - exact.best_weight) <= 1e-9) ++hits;
    }
    EXPECT_GE(hits, 95);
}

TEST(SolveSls, RejectsBadConfig) {
    const WcnfFormula f = qubo_to_wcnf(pair_qubo(-1.0));
    SolverConfig cfg;
    cfg.restart_patience = 0;
    EXPECT_THROW(solve_sls(f, cfg), ConfigError);
    cfg = {};
    cfg.noise = 1.5;
    EXPECT_THROW(solve_sls(f, cfg), ConfigError);
    WcnfFormula none;
    EXPECT_THROW(solve_sls(none, SolverConfig{}), ArgumentError);
}

TEST(SolveExactBipartite, HandCases) {
    const SolveResult zero = solve_exact_bipartite(rbm_to_qubo(RbmParams::zeros(2, 2)));
    EXPECT_EQ(zero.best_weight, 0.0);
    EXPECT_EQ(zero.trace.points.size(), 1U);

    RbmParams p = RbmParams::zeros(1, 1);
    p.weights(0, 0) = 2.0;
    p.visible_bias[0] = 1.0;
    p.hidden_bias[0] = -1.0;
    const SolveResult r = solve_exact_bipartite(rbm_to_qubo(p));
    EXPECT_EQ(r.best_assignment, (Assignment{1, 1}));
    EXPECT_DOUBLE_EQ(r.best_weight, -2.0);
}

TEST(SolveExactBipartite, AgreesWithFullEnumeration) {
    std::mt19937_64 gen(31337);
    std::uniform_int_distribution<int> size(1, 8);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = size(gen);
        const int n = size(gen);
        const oracle::DenseRbm r = oracle::random_rbm(m, n, 1.0, gen);
        const QuboProblem q = rbm_to_qubo(to_params(r));
        const SolveResult got = solve_exact_bipartite(q);
        const oracle::Ground want = oracle::brute_ground(r);
        EXPECT_NEAR(got.best_weight, want.energy, 1e-12) << "m=" << m << " n=" << n;
        EXPECT_NEAR(qubo_energy(q, got.best_assignment), want.energy, 1e-12);
    }
}

TEST(SolveExactBipartite, GuardAndBipartiteCheck) {
    EXPECT_THROW(solve_exact_bipartite(rbm_to_qubo(RbmParams::zeros(25, 26))), CapacityError);
    EXPECT_NO_THROW(solve_exact_bipartite(rbm_to_qubo(RbmParams::zeros(3, 40))));
    QuboProblem q = rbm_to_qubo(RbmParams::zeros(2, 2));
    q.quadratic.push_back({0, 1, 1.0});
    EXPECT_THROW(solve_exact_bipartite(q), ArgumentError);
}

TEST(ModelStatsFromSolve, BestMode) {
    const QuboProblem q = rbm_to_qubo(RbmParams::zeros(2, 1));
    SolveResult r;
    r.best_assignment = {1, 0, 1};
    const ExpectationStats s = model_stats_from_solve(q, r, StatsMode::best);
    Eigen::MatrixXd vh(1, 2);
    vh << 1, 0;
    EXPECT_EQ(s.vh, vh);
    EXPECT_EQ(s.v, testutil::to_vec({1, 0}));
    EXPECT_EQ(s.h, testutil::to_vec({1}));

    r.best_assignment = {1, 1, 1};
    EXPECT_EQ(model_stats_from_solve(q, r, StatsMode::best).vh, Eigen::MatrixXd::Ones(1, 2));
}

TEST(ModelStatsFromSolve, BestModeMatchesGroundStateOuterProduct) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const QuboProblem q = random_rbm_qubo(5, 4, 900 + seed);
        const WcnfFormula f = qubo_to_wcnf(q);
        SolverConfig cfg;
        cfg.seed = seed;
        const SolveResult sls = solve_sls(f, cfg);
        const SolveResult exact = solve_exact_bipartite(q, f.offset);
        if (std::abs(sls.best_weight - exact.best_weight) > 1e-9) continue;
        const BinaryState g = split_assignment(q, exact.best_assignment);
        EXPECT_EQ(model_stats_from_solve(q, sls, StatsMode::best).vh, g.h * g.v.transpose());
    }
}

TEST(ModelStatsFromSolve, TimeAverageNeedsRecording) {
    const QuboProblem q = random_rbm_qubo(3, 3, 1);
    const WcnfFormula f = qubo_to_wcnf(q);
    const SolveResult plain = solve_sls(f, SolverConfig{});
    EXPECT_THROW(model_stats_from_solve(q, plain, StatsMode::time_average), ConfigError);

    SolverConfig cfg;
    cfg.record_assignments = true;
    const SolveResult rec = solve_sls(f, cfg);
    ASSERT_FALSE(rec.trace.assignments.empty());
    const ExpectationStats s = model_stats_from_solve(q, rec, StatsMode::time_average);
    Eigen::MatrixXd vh = Eigen::MatrixXd::Zero(3, 3);
    for (const auto& x : rec.trace.assignments) {
        const BinaryState b = split_assignment(q, x);
        vh += b.h * b.v.transpose();
    }
    vh /= static_cast<double>(rec.trace.assignments.size());
    EXPECT_TRUE(s.vh.isApprox(vh, 1e-14));
    EXPECT_TRUE((s.vh.array() >= 0.0).all() && (s.vh.array() <= 1.0).all());
}

TEST(Solve, DispatchesBackends) {
    const QuboProblem q = random_rbm_qubo(4, 4, 3);
    const WcnfFormula f = qubo_to_wcnf(q);
    const SolveResult e = solve(q, f, SolverBackend::exact_bipartite, SolverConfig{});
    EXPECT_NEAR(e.best_weight, unsat_weight(f, e.best_assignment), 1e-9);
    const SolveResult s = solve(q, f, SolverBackend::sls, SolverConfig{});
    EXPECT_GE(s.best_weight, e.best_weight - 1e-9);
}

TEST(WcnfText, WriteReadRoundTrip) {
    const QuboProblem q = random_rbm_qubo(3, 2, 12);
    const WcnfFormula f = qubo_to_wcnf(q);
    std::stringstream ss;
    write_wcnf(ss, f);
    const std::string text = ss.str();
    EXPECT_NE(text.find("c scale 1000000"), std::string::npos);
    EXPECT_NE(text.find("p wcnf 5 " + std::to_string(f.clauses.size()) + " "), std::string::npos);

    const WcnfFormula g = read_wcnf(ss);
    ASSERT_EQ(g.num_vars, f.num_vars);
    ASSERT_EQ(g.clauses.size(), f.clauses.size());
    EXPECT_NEAR(g.offset, f.offset, 1e-9);
    for (std::uint64_t code = 0; code < 32; ++code) {
        const Assignment x = oracle::bits_of(code, 5);
        EXPECT_NEAR(unsat_weight(g, x), unsat_weight(f, x), 1e-6 * static_cast<double>(f.clauses.size()));
    }
}

TEST(WcnfText, IntegerWeightsAndTop) {
    WcnfFormula f;
    f.num_vars = 2;
    f.clauses = {{{{0, true}}, 1.5}, {{{0, false}, {1, true}}, 0.25}};
    std::ostringstream out;
    write_wcnf(out, f);
    std::istringstream lines(out.str());
    std::string line;
    std::vector<std::string> body;
    while (std::getline(lines, line)) {
        if (!line.empty() && line[0] != 'c') body.push_back(line);
    }
    ASSERT_EQ(body.size(), 3U);
    EXPECT_EQ(body[0], "p wcnf 2 2 1750001");
    EXPECT_EQ(body[1], "1500000 1 0");
    EXPECT_EQ(body[2], "250000 -1 2 0");
}

TEST(WcnfText, RejectsMalformedInput) {
    std::istringstream no_header("1 1 0\n");
    EXPECT_THROW(read_wcnf(no_header), FormatError);
    std::istringstream unterminated("p wcnf 2 1 10\n3 1 2\n");
    EXPECT_THROW(read_wcnf(unterminated), FormatError);
    std::istringstream short_file("p wcnf 2 3 10\n3 1 0\n");
    EXPECT_THROW(read_wcnf(short_file), TruncationError);
    std::istringstream out_of_range("p wcnf 2 1 10\n3 5 0\n");
    EXPECT_THROW(read_wcnf(out_of_range), FormatError);
}
