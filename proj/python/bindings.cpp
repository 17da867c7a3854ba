#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "qubodbn/data.hpp"
#include "qubodbn/errors.hpp"
#include "qubodbn/harness.hpp"
#include "qubodbn/maxsat.hpp"
#include "qubodbn/qubo.hpp"
#include "qubodbn/rbm.hpp"

namespace py = pybind11;
using namespace qubodbn;

namespace {

RbmParams make_params(const Eigen::MatrixXd& weights, const Eigen::VectorXd& visible_bias,
                      const Eigen::VectorXd& hidden_bias) {
    RbmParams p{weights, visible_bias, hidden_bias};
    p.check_shape();
    return p;
}

py::dict stats_dict(const ExpectationStats& s) {
    py::dict d;
    d["vh"] = s.vh;
    d["v"] = s.v;
    d["h"] = s.h;
    return d;
}

py::dict solve_dict(const SolveResult& r) {
    py::dict d;
    d["best_weight"] = r.best_weight;
    d["assignment"] = std::vector<int>(r.best_assignment.begin(), r.best_assignment.end());
    d["restarts_used"] = r.restarts_used;
    return d;
}

Assignment to_assignment(const std::vector<int>& x) { return {x.begin(), x.end()}; }

ExperimentConfig config_from(const std::map<std::string, std::string>& overrides) {
    return ExperimentConfig::from_map(overrides);
}

}  // namespace

PYBIND11_MODULE(_qubodbn, m) {
    m.doc() = "RBM pretraining with QUBO / weighted MAX-SAT model expectations";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

    m.def(
        "energy",
        [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& c, const Eigen::VectorXd& v,
           const Eigen::VectorXd& h) { return energy(make_params(w, b, c), v, h); },
        py::arg("weights"), py::arg("visible_bias"), py::arg("hidden_bias"), py::arg("v"), py::arg("h"),
        "RBM energy; weights are n_hidden x n_visible.");

    m.def(
        "rbm_to_qubo",
        [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
            const QuboProblem q = rbm_to_qubo(make_params(w, b, c));
            std::vector<std::tuple<int, int, double>> quad;
            for (const auto& t : q.quadratic) quad.emplace_back(t.i, t.j, t.coefficient);
            return py::make_tuple(q.linear, quad);
        },
        py::arg("weights"), py::arg("visible_bias"), py::arg("hidden_bias"),
        "Returns (linear, [(i, j, coefficient), ...]) over x = (v, h).");

    m.def(
        "qubo_energy",
        [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& c, const std::vector<int>& x) {
            return qubo_energy(rbm_to_qubo(make_params(w, b, c)), to_assignment(x));
        },
        py::arg("weights"), py::arg("visible_bias"), py::arg("hidden_bias"), py::arg("x"));

    m.def(
        "wcnf_text",
        [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
            std::ostringstream out;
            write_wcnf(out, qubo_to_wcnf(rbm_to_qubo(make_params(w, b, c))));
            return out.str();
        },
        py::arg("weights"), py::arg("visible_bias"), py::arg("hidden_bias"));

    m.def(
        "solve_sls",
        [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& c, std::uint64_t seed,
           int restart_patience, double noise) {
            const QuboProblem q = rbm_to_qubo(make_params(w, b, c));
            const WcnfFormula f = qubo_to_wcnf(q);
            SolverConfig cfg;
            cfg.seed = seed;
            cfg.restart_patience = restart_patience;
            cfg.noise = noise;
            py::dict d = solve_dict(solve_sls(f, cfg));
            d["offset"] = f.offset;
            return d;
        },
        py::arg("weights"), py::arg("visible_bias"), py::arg("hidden_bias"), py::arg("seed") = 0,
        py::arg("restart_patience") = 28, py::arg("noise") = 0.1,
        "Local search on the WCNF form; best_weight is energy + offset.");

    m.def(
        "solve_exact_bipartite",
        [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
            return solve_dict(solve_exact_bipartite(rbm_to_qubo(make_params(w, b, c))));
        },
        py::arg("weights"), py::arg("visible_bias"), py::arg("hidden_bias"),
        "Exact ground state; best_weight is the energy.");

    m.def(
        "exact_model_expectation",
        [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
            const ExactModelStats s = exact_model_expectation(make_params(w, b, c));
            py::dict d = stats_dict(s.stats);
            d["log_partition_function"] = s.log_partition_function;
            return d;
        },
        py::arg("weights"), py::arg("visible_bias"), py::arg("hidden_bias"));

    m.def(
        "cd_estimate",
        [](const Eigen::MatrixXd& w, const Eigen::VectorXd& b, const Eigen::VectorXd& c, const Eigen::MatrixXd& batch,
           int k, std::uint64_t seed) {
            Rng rng = make_stream(seed);
            const CdEstimate e = cd_estimate(make_params(w, b, c), batch, k, rng);
            return py::make_tuple(stats_dict(e.data), stats_dict(e.model));
        },
        py::arg("weights"), py::arg("visible_bias"), py::arg("hidden_bias"), py::arg("batch"), py::arg("k") = 1,
        py::arg("seed") = 0, "Returns (data_stats, model_stats).");

    m.def(
        "reduce_image",
        [](const std::vector<double>& pixels) { return reduce_image(pixels); }, py::arg("pixels"),
        "784 pixels in [0,1] -> 32 block averages.");

    m.def(
        "parse_idx",
        [](const py::bytes& data) {
            const std::string s = data;
            const IdxArray a = parse_idx({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
            return py::make_tuple(a.element_type, a.dims,
                                  py::bytes(reinterpret_cast<const char*>(a.payload.data()), a.payload.size()));
        },
        py::arg("data"), "Returns (element_type, dims, payload bytes).");

    m.def("default_config", [] { return default_config(); });

    m.def(
        "run_experiment",
        [](const std::map<std::string, std::string>& overrides) {
            const ExperimentConfig cfg = config_from(overrides);
            std::vector<ResultRow> rows;
            {
                py::gil_scoped_release release;
                rows = run_experiment(cfg);
            }
            std::ostringstream out;
            write_results_csv(out, cfg, rows);
            return out.str();
        },
        py::arg("config") = std::map<std::string, std::string>{},
        "Runs a sweep with the given key overrides and returns the CSV text.");

    m.def(
        "trace",
        [](const std::map<std::string, std::string>& overrides) {
            std::ostringstream out;
            emit_trace(out, config_from(overrides));
            return out.str();
        },
        py::arg("config") = std::map<std::string, std::string>{}, "Solver trace CSV for one random RBM.");
}
