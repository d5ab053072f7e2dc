"""Laguerre-transform one-way wave extrapolation and prestack depth migration."""

from lagmig.laguerre import (
    LaguerreParams,
    LaguerreSpectrum,
    eval_laguerre_functions,
    laguerre_convolve,
    phi1_all,
    phi2_all,
    synthesize,
)

__all__ = [
    "LaguerreParams",
    "LaguerreSpectrum",
    "eval_laguerre_functions",
    "laguerre_convolve",
    "phi1_all",
    "phi2_all",
    "synthesize",
]

__version__ = "0.1.0"
