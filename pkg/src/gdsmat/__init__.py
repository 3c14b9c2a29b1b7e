"""Structured matrix recovery with the generalized Dantzig selector.

Symmetric gauges on vectors (:mod:`gdsmat.gauges`) lift to unitarily
invariant matrix norms (:mod:`gdsmat.spectral`).  Measurements and noise
come from :mod:`gdsmat.measurements`, the estimator from
:mod:`gdsmat.solver`, the geometric error predictions from
:mod:`gdsmat.geometry`, and sweeps plus calibration from
:mod:`gdsmat.experiment`.
"""

from .gauges import OWL, L1, L2, Gauge, GaugeConstants, KSupport, KyFan, UnsupportedOperation, gauge_from_dict, rho
from .geometry import (
    GeometryReport,
    alpha_pred,
    error_bound_pred,
    geometry_report,
    lambda_rules,
    psi_bound,
    width_ball_bound,
    width_ball_mc,
    width_cone_bound,
    width_cone_mc,
)
from .measurements import (
    Ensemble,
    ImplicitMeasurements,
    MeasurementSet,
    adjoint,
    forward,
    observe,
    operator_norm_estimate,
    sample,
)
from .solver import GdsProblem, GdsSolution, SolverOptions, check_solution, solve
from .spectral import SpectralNorm, SubspaceDecomposition

__version__ = "0.1.0"

__all__ = [
    "Ensemble",
    "GaugeConstants",
    "Gauge",
    "GdsProblem",
    "GdsSolution",
    "GeometryReport",
    "ImplicitMeasurements",
    "KSupport",
    "KyFan",
    "L1",
    "L2",
    "MeasurementSet",
    "OWL",
    "SolverOptions",
    "SpectralNorm",
    "SubspaceDecomposition",
    "UnsupportedOperation",
    "adjoint",
    "alpha_pred",
    "check_solution",
    "error_bound_pred",
    "forward",
    "gauge_from_dict",
    "geometry_report",
    "lambda_rules",
    "observe",
    "operator_norm_estimate",
    "psi_bound",
    "rho",
    "sample",
    "solve",
    "width_ball_bound",
    "width_ball_mc",
    "width_cone_bound",
    "width_cone_mc",
]
