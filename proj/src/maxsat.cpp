#include "qubodbn/maxsat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qubodbn/errors.hpp"
#include "qubodbn/random.hpp"

namespace qubodbn {

void SolverConfig::validate() const {
    if (restart_patience < 1) throw ConfigError("restart_patience must be >= 1");
    if (!(noise >= 0.0 && noise <= 1.0)) throw ConfigError("noise must lie in [0,1]");
    if (max_flips_per_restart < 0) throw ConfigError("max_flips_per_restart must be >= 0");
    if (record_stride < 1) throw ConfigError("record_stride must be >= 1");
}

WcnfFormula qubo_to_wcnf(const QuboProblem& q) {
    q.validate();
    WcnfFormula f;
    f.num_vars = q.num_vars;
    // Energy coefficients are the negated Q entries.
    for (int k = 0; k < q.num_vars; ++k) {
        const double c = -q.linear[static_cast<std::size_t>(k)];
        if (c > 0.0) {
            f.clauses.push_back({{{k, false}}, c});
        } else if (c < 0.0) {
            f.clauses.push_back({{{k, true}}, -c});
            f.offset += -c;
        }
    }
    for (const auto& t : q.quadratic) {
        const double c = -t.coefficient;
        if (c > 0.0) {
            f.clauses.push_back({{{t.i, false}, {t.j, false}}, c});
        } else if (c < 0.0) {
            // |c| (1 - x_i x_j) = |c| (1 - x_i) + |c| x_i (1 - x_j)
            f.clauses.push_back({{{t.i, true}}, -c});
            f.clauses.push_back({{{t.i, false}, {t.j, true}}, -c});
            f.offset += -c;
        }
    }
    return f;
}

double unsat_weight(const WcnfFormula& f, std::span<const std::uint8_t> x) {
    if (static_cast<int>(x.size()) != f.num_vars) {
        throw ShapeError("assignment has " + std::to_string(x.size()) + " bits, formula has " +
                         std::to_string(f.num_vars) + " variables");
    }
    double total = 0.0;
    for (const auto& c : f.clauses) {
        const bool sat = std::any_of(c.literals.begin(), c.literals.end(),
                                     [&](const Literal& l) { return l.satisfied_by(x); });
        if (!sat) total += c.weight;
    }
    return total;
}

namespace {

// Incremental clause bookkeeping for one local-search run. score[v] is the
// drop in unsatisfied weight obtained by flipping v.
class SearchState {
public:
    explicit SearchState(const WcnfFormula& f) : f_(f), occurs_(static_cast<std::size_t>(f.num_vars)) {
        for (std::size_t c = 0; c < f.clauses.size(); ++c) {
            for (const auto& l : f.clauses[c].literals) {
                occurs_[static_cast<std::size_t>(l.var)].push_back(c);
            }
        }
        true_count_.resize(f.clauses.size());
        unsat_pos_.resize(f.clauses.size());
        score_.resize(static_cast<std::size_t>(f.num_vars));
    }

    void reset(Assignment x) {
        x_ = std::move(x);
        std::fill(score_.begin(), score_.end(), 0.0);
        unsat_.clear();
        weight_ = 0.0;
        for (std::size_t c = 0; c < f_.clauses.size(); ++c) {
            true_count_[c] = count_true(c);
            if (true_count_[c] == 0) {
                unsat_pos_[c] = unsat_.size();
                unsat_.push_back(c);
                weight_ += f_.clauses[c].weight;
            }
            contribute(c, +1.0);
        }
    }

    void flip(int var) {
        const auto& occ = occurs_[static_cast<std::size_t>(var)];
        for (std::size_t c : occ) contribute(c, -1.0);
        x_[static_cast<std::size_t>(var)] ^= 1U;
        for (std::size_t c : occ) {
            const int before = true_count_[c];
            const int after = count_true(c);
            true_count_[c] = after;
            if (before == 0 && after > 0) {
                remove_unsat(c);
                weight_ -= f_.clauses[c].weight;
            } else if (before > 0 && after == 0) {
                unsat_pos_[c] = unsat_.size();
                unsat_.push_back(c);
                weight_ += f_.clauses[c].weight;
            }
            contribute(c, +1.0);
        }
    }

    // Highest score among variables of violated clauses, ties to the lowest index.
    [[nodiscard]] int greedy_pick() const {
        int best = -1;
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c : unsat_) {
            for (const auto& l : f_.clauses[c].literals) {
                const double s = score_[static_cast<std::size_t>(l.var)];
                if (s > best_score || (s == best_score && l.var < best)) {
                    best = l.var;
                    best_score = s;
                }
            }
        }
        return best;
    }

    [[nodiscard]] int random_walk_pick(Rng& rng) const {
        std::uniform_int_distribution<std::size_t> pick_clause(0, unsat_.size() - 1);
        const auto& lits = f_.clauses[unsat_[pick_clause(rng)]].literals;
        std::uniform_int_distribution<std::size_t> pick_lit(0, lits.size() - 1);
        return lits[pick_lit(rng)].var;
    }

    [[nodiscard]] bool all_satisfied() const { return unsat_.empty(); }
    [[nodiscard]] double weight() const { return weight_; }
    [[nodiscard]] const Assignment& assignment() const { return x_; }

private:
    int count_true(std::size_t c) const {
        int n = 0;
        for (const auto& l : f_.clauses[c].literals) n += l.satisfied_by(x_) ? 1 : 0;
        return n;
    }

    void contribute(std::size_t c, double sign) {
        const auto& cl = f_.clauses[c];
        if (true_count_[c] == 0) {
            for (const auto& l : cl.literals) score_[static_cast<std::size_t>(l.var)] += sign * cl.weight;
        } else if (true_count_[c] == 1) {
            for (const auto& l : cl.literals) {
                if (l.satisfied_by(x_)) score_[static_cast<std::size_t>(l.var)] -= sign * cl.weight;
            }
        }
    }

    void remove_unsat(std::size_t c) {
        const std::size_t pos = unsat_pos_[c];
        const std::size_t last = unsat_.back();
        unsat_[pos] = last;
        unsat_pos_[last] = pos;
        unsat_.pop_back();
    }

    const WcnfFormula& f_;
    std::vector<std::vector<std::size_t>> occurs_;
    Assignment x_;
    std::vector<int> true_count_;
    std::vector<std::size_t> unsat_;
    std::vector<std::size_t> unsat_pos_;
    std::vector<double> score_;
    double weight_ = 0.0;
};

Assignment random_assignment(int num_vars, Rng& rng) {
    Assignment x(static_cast<std::size_t>(num_vars));
    std::bernoulli_distribution coin(0.5);
    for (auto& b : x) b = coin(rng) ? 1 : 0;
    return x;
}

}  // namespace

SolveResult solve_sls(const WcnfFormula& f, const SolverConfig& cfg) {
    cfg.validate();
    if (f.num_vars < 1) throw ArgumentError("formula has no variables");
    const long max_flips =
        cfg.max_flips_per_restart > 0 ? cfg.max_flips_per_restart : 100L * f.num_vars;

    Rng rng = make_stream(cfg.seed);
    SearchState state(f);
    SolveResult result;
    result.best_weight = std::numeric_limits<double>::infinity();
    long flips = 0;

    auto record = [&](bool force) {
        if (cfg.record_assignments && (force || flips % cfg.record_stride == 0)) {
            result.trace.assignments.push_back(state.assignment());
        }
    };
    // Returns true when the global best strictly improved.
    auto offer_best = [&]() {
        const Assignment& x = state.assignment();
        const double exact = unsat_weight(f, x);
        if (exact < result.best_weight) {
            const bool improved = result.best_assignment.empty() ||
                                  exact < result.best_weight - 1e-12 * (1.0 + std::abs(result.best_weight));
            result.best_weight = exact;
            result.best_assignment = x;
            return improved;
        }
        if (exact == result.best_weight && x < result.best_assignment) result.best_assignment = x;
        return false;
    };
    auto descend = [&](bool is_restart) {
        state.reset(random_assignment(f.num_vars, rng));
        double local_best = state.weight();
        result.trace.points.push_back({flips, local_best, is_restart});
        record(true);
        bool improved = offer_best();
        for (long step = 0; step < max_flips && !state.all_satisfied(); ++step) {
            const int var = uniform01(rng) < cfg.noise ? state.random_walk_pick(rng) : state.greedy_pick();
            state.flip(var);
            ++flips;
            record(false);
            if (state.weight() < local_best) {
                local_best = state.weight();
                result.trace.points.push_back({flips, local_best, false});
                improved = offer_best() || improved;
            }
        }
        return improved;
    };

    descend(false);
    int stale = 0;
    while (stale < cfg.restart_patience && result.best_weight > 0.0) {
        result.trace.restart_markers.push_back(flips);
        ++result.restarts_used;
        stale = descend(true) ? 0 : stale + 1;
    }
    result.best_weight = unsat_weight(f, result.best_assignment);
    return result;
}

SolveResult solve_exact_bipartite(const QuboProblem& q, double offset) {
    q.validate();
    const int m = q.layout.num_visible;
    const int n = q.layout.num_hidden;
    const bool enumerate_visible = m <= n;
    const int small = enumerate_visible ? m : n;
    const int large = enumerate_visible ? n : m;
    if (small > kMaxBipartiteEnumeration) {
        throw CapacityError("exact bipartite solve needs a layer of at most " +
                            std::to_string(kMaxBipartiteEnumeration) + " units");
    }
    const int small_base = enumerate_visible ? 0 : m;
    const int large_base = enumerate_visible ? m : 0;

    // coupling(s, l) between enumerated unit s and closed-form unit l
    Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(small, large);
    for (const auto& t : q.quadratic) {
        const bool i_vis = t.i < m;
        const bool j_vis = t.j < m;
        if (i_vis == j_vis) throw ArgumentError("QUBO has an intra-layer term; not bipartite");
        const int vis = i_vis ? t.i : t.j;
        const int hid = (i_vis ? t.j : t.i) - m;
        if (enumerate_visible) {
            coupling(vis, hid) += t.coefficient;
        } else {
            coupling(hid, vis) += t.coefficient;
        }
    }

    Assignment best;
    double best_energy = std::numeric_limits<double>::infinity();
    Assignment x(static_cast<std::size_t>(q.num_vars), 0);
    const std::uint64_t count = std::uint64_t{1} << small;
    Eigen::VectorXd input(large);
    for (std::uint64_t mask = 0; mask < count; ++mask) {
        double e = 0.0;
        for (int l = 0; l < large; ++l) input[l] = q.linear[static_cast<std::size_t>(large_base + l)];
        for (int s = 0; s < small; ++s) {
            const bool on = (mask >> s) & 1U;
            x[static_cast<std::size_t>(small_base + s)] = on ? 1 : 0;
            if (on) {
                e -= q.linear[static_cast<std::size_t>(small_base + s)];
                input += coupling.row(s).transpose();
            }
        }
        for (int l = 0; l < large; ++l) {
            const bool on = input[l] > 0.0;
            x[static_cast<std::size_t>(large_base + l)] = on ? 1 : 0;
            if (on) e -= input[l];
        }
        if (e < best_energy || (e == best_energy && x < best)) {
            best_energy = e;
            best = x;
        }
    }

    SolveResult r;
    r.best_assignment = std::move(best);
    r.best_weight = qubo_energy(q, r.best_assignment) + offset;
    r.trace.points.push_back({0, r.best_weight, false});
    return r;
}

SolveResult solve(const QuboProblem& q, const WcnfFormula& f, SolverBackend backend,
                  const SolverConfig& cfg) {
    switch (backend) {
        case SolverBackend::sls:
            return solve_sls(f, cfg);
        case SolverBackend::exact_bipartite:
            return solve_exact_bipartite(q, f.offset);
    }
    throw ConfigError("unknown solver backend");
}

ExpectationStats model_stats_from_solve(const QuboProblem& q, const SolveResult& r, StatsMode mode) {
    if (mode == StatsMode::best) {
        const BinaryState s = split_assignment(q, r.best_assignment);
        return {s.h * s.v.transpose(), s.v, s.h};
    }
    if (r.trace.assignments.empty()) {
        throw ConfigError("time-average statistics need a solve with record_assignments enabled");
    }
    ExpectationStats acc = ExpectationStats::zeros(q.layout.num_visible, q.layout.num_hidden);
    for (const auto& x : r.trace.assignments) {
        const BinaryState s = split_assignment(q, x);
        acc.vh += s.h * s.v.transpose();
        acc.v += s.v;
        acc.h += s.h;
    }
    const double inv = 1.0 / static_cast<double>(r.trace.assignments.size());
    acc.vh *= inv;
    acc.v *= inv;
    acc.h *= inv;
    return acc;
}

}  // namespace qubodbn
