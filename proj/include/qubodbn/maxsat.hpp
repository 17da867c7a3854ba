#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "qubodbn/qubo.hpp"

namespace qubodbn {

struct Literal {
    int var = 0;
    bool positive = true;

    [[nodiscard]] bool satisfied_by(std::span<const std::uint8_t> x) const {
        return (x[static_cast<std::size_t>(var)] != 0) == positive;
    }
    friend bool operator==(const Literal&, const Literal&) = default;
};

struct WeightedClause {
    std::vector<Literal> literals;
    double weight = 0.0;
};

/// Weighted CNF whose unsatisfied weight equals the source QUBO energy plus `offset`.
struct WcnfFormula {
    int num_vars = 0;
    std::vector<WeightedClause> clauses;
    double offset = 0.0;
};

struct SolverConfig {
    int restart_patience = 28;
    // 0 selects 100 * num_vars.
    long max_flips_per_restart = 0;
    double noise = 0.1;
    std::uint64_t seed = 0;
    // Keep every `record_stride`-th visited assignment for time averaging.
    bool record_assignments = false;
    int record_stride = 1;

    void validate() const;
};

struct TracePoint {
    long flip_count = 0;
    double best_weight = 0.0;  // best weight within the current restart so far
    bool restart = false;      // first point of a restart (not of the initial descent)
};

struct SolverTrace {
    std::vector<TracePoint> points;
    std::vector<long> restart_markers;
    std::vector<Assignment> assignments;  // only with SolverConfig::record_assignments
};

struct SolveResult {
    Assignment best_assignment;
    double best_weight = 0.0;
    int restarts_used = 0;
    SolverTrace trace;
};

enum class SolverBackend { sls, exact_bipartite };

enum class StatsMode { best, time_average };

WcnfFormula qubo_to_wcnf(const QuboProblem& q);

double unsat_weight(const WcnfFormula& f, std::span<const std::uint8_t> x);

/// Restart-based weighted MAX-SAT local search. Each restart starts from a
/// uniformly random assignment and performs up to max_flips_per_restart flips;
/// the run ends after `restart_patience` consecutive restarts fail to improve
/// the global best (or as soon as a zero-weight assignment is found).
SolveResult solve_sls(const WcnfFormula& f, const SolverConfig& cfg);

/// Exact ground state of a bipartite QUBO: enumerates the smaller layer and sets
/// each unit of the other layer to 1 iff its total input is positive. The
/// reported weight is energy + offset, so pass the formula offset to compare
/// against unsat weights.
SolveResult solve_exact_bipartite(const QuboProblem& q, double offset = 0.0);

// Largest smaller-layer size accepted by solve_exact_bipartite.
inline constexpr int kMaxBipartiteEnumeration = 24;

/// Runs the chosen backend on the formula converted from `q`.
SolveResult solve(const QuboProblem& q, const WcnfFormula& f, SolverBackend backend,
                  const SolverConfig& cfg);

ExpectationStats model_stats_from_solve(const QuboProblem& q, const SolveResult& r,
                                        StatsMode mode = StatsMode::best);

// Integer weight scale used when writing WCNF text.
inline constexpr double kWcnfWeightScale = 1e6;

/// Writes "p wcnf" text. Weights are multiplied by `scale` and rounded; the
/// scale and offset are stored in comment lines so read_wcnf can undo them.
void write_wcnf(std::ostream& out, const WcnfFormula& f, double scale = kWcnfWeightScale);
WcnfFormula read_wcnf(std::istream& in);

}  // namespace qubodbn
