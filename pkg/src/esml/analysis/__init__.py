"""Analytic objects of the normalized-distance chain and convergence diagnostics."""

from .diagnostics import (
    DiagnosticsReport,
    ErgodicityDiagnostics,
    RateFit,
    ergodicity_diagnostics,
    geometric_rate_fit,
)
from .drift import (
    BetaResult,
    DeltaInfinity,
    DriftCurve,
    DriftPoint,
    beta_grid,
    conditional_mean,
    delta_infinity,
    delta_infinity_mc,
    delta_infinity_quadrature,
    drift,
    drift_curve,
    drift_ratio,
    exp_moment,
    find_beta,
    shell_contributions,
)
from .kernel import (
    ContinuityProbe,
    kernel_continuity_probe,
    resampled_density,
    selected_density,
    selected_first_cdf,
    selection_marginal_cdf,
    transition_prob,
)
from .quadrature import DEFAULT_SPEC, QuadratureSpec, TruncatedPlane

__all__ = [
    "BetaResult", "ContinuityProbe", "DEFAULT_SPEC", "DeltaInfinity", "DiagnosticsReport",
    "DriftCurve", "DriftPoint", "ErgodicityDiagnostics", "QuadratureSpec", "RateFit",
    "TruncatedPlane", "beta_grid", "conditional_mean", "delta_infinity", "delta_infinity_mc",
    "delta_infinity_quadrature", "drift", "drift_curve", "drift_ratio",
    "ergodicity_diagnostics", "exp_moment", "find_beta", "geometric_rate_fit",
    "kernel_continuity_probe", "resampled_density", "selected_density", "selected_first_cdf",
    "selection_marginal_cdf", "shell_contributions", "transition_prob",
]
