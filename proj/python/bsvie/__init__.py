"""Adapted-solution engine for backward stochastic Volterra equations.

Picard iteration with cross-sectional polynomial regression, a deterministic
Volterra solver, and dynamic risk-measure property checks. The numeric core is
C++; heavy solves release the GIL and results are bit-identical for a fixed
seed regardless of the worker count.
"""

from ._bsvie import (
    BasisSpec,
    BatteryConfig,
    GeneratorSpec,
    InitialIterate,
    KernelSpec,
    LipschitzReport,
    MSolutionEstimate,
    PathEnsemble,
    PicardOptions,
    RiskGenerator,
    SolverReport,
    TerminalSpec,
    TimeGrid,
    check_lipschitz,
    check_translation,
    closed_form_translation,
    coherence_report,
    default_axiom_tolerance,
    default_beta,
    m_condition_residuals,
    martingale_calibration,
    picard_solve,
    polynomial_basis_size,
    rho,
    sample_paths,
    set_thread_count,
    sin_counterexample,
    sin_state_coefficient,
    solve_bvie,
    thread_count,
)

__version__ = "0.1.0"

__all__ = [
    "BasisSpec",
    "BatteryConfig",
    "GeneratorSpec",
    "InitialIterate",
    "KernelSpec",
    "LipschitzReport",
    "MSolutionEstimate",
    "PathEnsemble",
    "PicardOptions",
    "RiskGenerator",
    "SolverReport",
    "TerminalSpec",
    "TimeGrid",
    "check_lipschitz",
    "check_translation",
    "closed_form_translation",
    "coherence_report",
    "default_axiom_tolerance",
    "default_beta",
    "m_condition_residuals",
    "martingale_calibration",
    "picard_solve",
    "polynomial_basis_size",
    "rho",
    "sample_paths",
    "set_thread_count",
    "sin_counterexample",
    "sin_state_coefficient",
    "solve_bvie",
    "thread_count",
]
