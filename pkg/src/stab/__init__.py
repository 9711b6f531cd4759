"""Stability certificates for unrolled forward-backward deconvolution networks."""
from .spectral import (
    FrequencyGrid,
    EigenSystem,
    PreFilterSpec,
    build_eigensystem,
    prefilter_eigs,
)
from .coeffs import LayerSchedule, CoefficientTable
from .bounds import BoundLedger, certify, layer_curves, stationary_report
from .network import ProxSpec, run_network, run_virtual, run_single_input, make_observation
from .estimator import UnfoldedDeconvolver

__version__ = "0.1.0"

__all__ = [
    "FrequencyGrid",
    "EigenSystem",
    "PreFilterSpec",
    "build_eigensystem",
    "prefilter_eigs",
    "LayerSchedule",
    "CoefficientTable",
    "BoundLedger",
    "certify",
    "layer_curves",
    "stationary_report",
    "ProxSpec",
    "run_network",
    "run_virtual",
    "run_single_input",
    "make_observation",
    "UnfoldedDeconvolver",
]
