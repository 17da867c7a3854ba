"""Python bindings for the qubodbn library."""

from ._qubodbn import (
    ConfigError,
    FormatError,
    cd_estimate,
    default_config,
    energy,
    exact_model_expectation,
    parse_idx,
    qubo_energy,
    rbm_to_qubo,
    reduce_image,
    run_experiment,
    solve_exact_bipartite,
    solve_sls,
    trace,
    wcnf_text,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "cd_estimate",
    "default_config",
    "energy",
    "exact_model_expectation",
    "parse_idx",
    "qubo_energy",
    "rbm_to_qubo",
    "reduce_image",
    "run_experiment",
    "solve_exact_bipartite",
    "solve_sls",
    "trace",
    "wcnf_text",
]
