"""Spatially coupled LDPC ensembles over the binary erasure channel.

Protograph construction and lifting, density evolution thresholds, an
instrumented flooding BP decoder, Monte Carlo sweeps and weight-2 error
floor analysis.
"""
__version__ = "0.1.0"

from .decoder import DecodeTrace, ErasurePattern, bp_decode, peel_stopping_set, sample_erasures, section_profile
from .density_evolution import ThresholdResult, bp_threshold, de_converges, de_iterate
from .ensemble import (
    EnsembleParams,
    TannerGraph,
    build_coupled_protograph,
    design_rate,
    lift,
    read_graph,
    sample_graph,
    validate_graph,
    write_graph,
)
from .error_floor import count_weight2, expected_floor, expurgate, poisson_lambda
from .montecarlo import SimConfig, iteration_distribution, min_iterations, run_sweep, scaling_experiment

__all__ = [
    "DecodeTrace",
    "EnsembleParams",
    "ErasurePattern",
    "SimConfig",
    "TannerGraph",
    "ThresholdResult",
    "bp_decode",
    "bp_threshold",
    "build_coupled_protograph",
    "count_weight2",
    "de_converges",
    "de_iterate",
    "design_rate",
    "expected_floor",
    "expurgate",
    "iteration_distribution",
    "lift",
    "min_iterations",
    "peel_stopping_set",
    "poisson_lambda",
    "read_graph",
    "run_sweep",
    "sample_erasures",
    "sample_graph",
    "scaling_experiment",
    "section_profile",
    "validate_graph",
    "write_graph",
]
