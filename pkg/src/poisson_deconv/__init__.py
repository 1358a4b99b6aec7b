"""Deconvolution of Poisson-noisy images with sparse dictionary priors.

The observed counts are variance-stabilized with the Anscombe transform and
the image is recovered as ``Phi a``, with ``a`` minimizing the stabilized
fidelity plus an l1 penalty under a positivity constraint, by
forward-backward splitting.
"""

from .dictionary import (
    IdentityDictionary,
    OrthogonalWavelet,
    ScaledDictionary,
    UndecimatedWavelet,
    UnionDictionary,
    parse_dictionary,
)
from .estimator import PoissonDeconvolver
from .fidelity import FidelityModel, anscombe
from .image import metrics, phantom, poissonize, read_image, rescale_peak, write_image
from .model_select import degrees_of_freedom, gcv, lambda_grid, sweep_lambda
from .operators import ConvOperator, Psf, make_psf, parse_psf
from .prox import L1, DrConfig, Penalty, project_positive_coefs, prox_f2, prox_penalty
from .solver import SolverConfig, SolverError, SolverReport, objective, solve, solve_fb, solve_tseng

__all__ = [
    "ConvOperator",
    "DrConfig",
    "FidelityModel",
    "IdentityDictionary",
    "L1",
    "OrthogonalWavelet",
    "Penalty",
    "PoissonDeconvolver",
    "Psf",
    "ScaledDictionary",
    "SolverConfig",
    "SolverError",
    "SolverReport",
    "UndecimatedWavelet",
    "UnionDictionary",
    "anscombe",
    "degrees_of_freedom",
    "gcv",
    "lambda_grid",
    "make_psf",
    "metrics",
    "objective",
    "parse_dictionary",
    "parse_psf",
    "phantom",
    "poissonize",
    "project_positive_coefs",
    "prox_f2",
    "prox_penalty",
    "read_image",
    "rescale_peak",
    "solve",
    "solve_fb",
    "solve_tseng",
    "sweep_lambda",
    "write_image",
]
