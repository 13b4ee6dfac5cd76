"""Picard solvers, admissibility certificates and diagnostics for quadratic mean-field BSDEs."""

from __future__ import annotations

from .admissibility import AdmissibilityReport, certify_scenario, compute_constants
from .analysis import (
    BmoEstimate,
    ComparisonReport,
    LemmaBoundReport,
    check_lemma_bound,
    compare_solutions,
    estimate_bmo,
    oracle_solution,
)
from .condexp import LatticeBackend, RegressionBackend, cond_expect, expect
from .errors import (
    ConfigurationError,
    EvaluationError,
    HypothesisError,
    IllConditionedRegression,
    InvalidArgument,
    MFBSDEError,
    ParseError,
    SchemaError,
    UnsupportedConfiguration,
)
from .generators import (
    DeltaCoefficients,
    Generator,
    GrowthEnvelope,
    check_A1_A2_A3,
    check_assumption_A,
    delta_coefficients,
    evaluate,
)
from .kernel import Lattice, PathEnsemble, TimeGrid, build_grid, build_lattice, dump_ensemble, load_ensemble, simulate_paths
from .particles import ConvergenceStudy, ParticleConfig, convergence_study, solve_particles
from .picard import DiscreteSolution, PicardReport, gamma_step, iterate_distance, picard_solve, shift_terminal
from .scenario import Scenario, load_scenario
from .terminals import TerminalValue

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityReport",
    "BmoEstimate",
    "ComparisonReport",
    "ConfigurationError",
    "ConvergenceStudy",
    "DeltaCoefficients",
    "DiscreteSolution",
    "EvaluationError",
    "Generator",
    "GrowthEnvelope",
    "HypothesisError",
    "IllConditionedRegression",
    "InvalidArgument",
    "Lattice",
    "LatticeBackend",
    "LemmaBoundReport",
    "MFBSDEError",
    "ParseError",
    "ParticleConfig",
    "PathEnsemble",
    "PicardReport",
    "RegressionBackend",
    "Scenario",
    "SchemaError",
    "TerminalValue",
    "TimeGrid",
    "UnsupportedConfiguration",
    "build_grid",
    "build_lattice",
    "certify_scenario",
    "check_A1_A2_A3",
    "check_assumption_A",
    "check_lemma_bound",
    "compare_solutions",
    "compute_constants",
    "cond_expect",
    "convergence_study",
    "delta_coefficients",
    "dump_ensemble",
    "estimate_bmo",
    "evaluate",
    "expect",
    "gamma_step",
    "iterate_distance",
    "load_ensemble",
    "load_scenario",
    "oracle_solution",
    "picard_solve",
    "shift_terminal",
    "simulate_paths",
    "solve_particles",
]
