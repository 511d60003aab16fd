"""Successive approximations for stochastic optimal control with controlled diffusion."""

from ._msa import (
    ConfigError,
    MsaError,
    NumericalError,
    ProvenanceError,
    ShapeError,
    brownian,
    cli,
    constant_cost,
    lq_oracle,
    rate_experiment,
    registry_keys,
    sequence_lemma_check,
    set_log_level,
    solve,
    validate_problem,
)

__all__ = [
    "ConfigError",
    "MsaError",
    "NumericalError",
    "ProvenanceError",
    "ShapeError",
    "brownian",
    "cli",
    "constant_cost",
    "lq_oracle",
    "rate_experiment",
    "registry_keys",
    "sequence_lemma_check",
    "set_log_level",
    "solve",
    "validate_problem",
]
