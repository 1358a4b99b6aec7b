"""scikit-learn style front end to the deconvolution pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_image
from .dictionary import Dictionary, parse_dictionary
from .fidelity import ANSCOMBE_OFFSET, FidelityModel
from .model_select import lambda_grid, parse_grid, sweep_lambda
from .operators import ConvOperator, Psf, parse_psf
from .prox import L1, DrConfig
from .solver import SolverConfig, initial_coefs, solve


def check_counts(y):
    """Validate an observed count image: finite, 2-D, nonnegative."""
    y = check_image(y, name="counts")
    if y.min() < 0:
        raise ValueError("observed counts must be nonnegative")
    return y


class PoissonDeconvolver(TransformerMixin, BaseEstimator):
    """Restore an image blurred by a known PSF and corrupted by Poisson noise.

    The counts are variance-stabilized, and the image is estimated as
    ``Phi a`` where ``a`` minimizes the stabilized fidelity plus
    ``lam * ||a||_1`` under ``Phi a >= 0``.

    Parameters
    ----------
    psf : str, Psf or array
        PSF spec (``"moving_average:7"``, ``"gaussian:1.5"``, ``"delta"``,
        ``"file:<path>"``), a :class:`Psf`, or a raw kernel (normalized).
    dictionary : str, Dictionary or callable
        Dictionary spec such as ``"tidwt:J=2"``, a :class:`Dictionary`, or a
        callable mapping an image shape to one.  The default keeps the
        undecimated transform shallow: with deeper decompositions the
        support-count degrees of freedom overshoot and GCV picks too large
        a ``lam``.
    lam : float or "gcv"
        Regularization weight.  ``"gcv"`` sweeps ``grid`` with the
        forward-backward solver and keeps the GCV minimizer.
    algo : {"fb", "tseng"} or None
        Solver for the final fit.  ``None`` means ``"fb"`` for a fixed
        ``lam`` and ``"tseng"`` after a GCV sweep.
    grid : str or sequence of float, optional
        ``"low:high:numlog"`` relative to the data-driven scale, or explicit
        absolute values.  Defaults to 12 log-spaced points in ``[1e-3, 1]``
        times the scale.
    n_iter, n_dr, relaxation, mu, beta, tau, theta, sigma, tol
        Solver settings; see :class:`~poisson_deconv.solver.SolverConfig`.
    offset : float
        Stabilization offset (3/8, or 1/8 for the bias-corrected variant).
    init : {"zero", "analysis"}

    Attributes
    ----------
    lambda_ : float
    coef_ : ndarray
    restored_ : ndarray
    report_ : SolverReport
    sweep_ : SweepResult or None
    model_ : FidelityModel
    """

    def __init__(self, psf="moving_average:7", dictionary="tidwt:J=2", lam=0.1, algo=None,
                 grid=None, n_iter=200, n_dr=1, relaxation=0.5, mu="auto", beta=1.0,
                 tau=0.5, theta=0.9, sigma=1.0, tol=0.0, offset=ANSCOMBE_OFFSET, init="zero"):
        self.psf = psf
        self.dictionary = dictionary
        self.lam = lam
        self.algo = algo
        self.grid = grid
        self.n_iter = n_iter
        self.n_dr = n_dr
        self.relaxation = relaxation
        self.mu = mu
        self.beta = beta
        self.tau = tau
        self.theta = theta
        self.sigma = sigma
        self.tol = tol
        self.offset = offset
        self.init = init

    def _make_psf(self):
        if isinstance(self.psf, Psf):
            return self.psf
        if isinstance(self.psf, str):
            return parse_psf(self.psf)
        return Psf(np.asarray(self.psf, dtype=np.float64)).normalized()

    def _make_dictionary(self, shape):
        if isinstance(self.dictionary, str):
            return parse_dictionary(self.dictionary, shape)
        if isinstance(self.dictionary, Dictionary):
            return self.dictionary
        return self.dictionary(shape)

    def _config(self, algo, lam):
        return SolverConfig(
            algo=algo, lam=float(lam), mu=self.mu, n_iter=self.n_iter, beta=self.beta,
            dr=DrConfig(n_iter=self.n_dr, relaxation=self.relaxation),
            tau=self.tau, theta=self.theta, sigma=self.sigma, tol=self.tol,
        )

    def _build_model(self, y):
        conv = ConvOperator(self._make_psf(), y.shape)
        return FidelityModel.from_counts(y, conv, self._make_dictionary(y.shape), self.offset)

    def _grid(self, model):
        if self.grid is None:
            return lambda_grid(model)
        if isinstance(self.grid, str):
            low, high, num, spacing = parse_grid(self.grid)
            return lambda_grid(model, num, low, high, spacing=spacing)
        return [float(v) for v in self.grid]

    def fit(self, y, reference=None):
        """Deconvolve the count image ``y``.

        ``reference`` (a ground-truth image) only annotates the GCV sweep
        with MAE/MSE values.
        """
        y = check_counts(y)
        model = self._build_model(y)
        a0 = initial_coefs(model, self.init)
        self.sweep_ = None
        if isinstance(self.lam, str):
            if self.lam != "gcv":
                raise ValueError(f"lam must be a number or 'gcv', got {self.lam!r}")
            self.sweep_ = sweep_lambda(
                model, L1, self._config("fb", 0.0), self._grid(model), reference, a0
            )
            lam = self.sweep_.best_lambda
            algo = self.algo or "tseng"
        else:
            lam = float(self.lam)
            algo = self.algo or "fb"
        self.report_ = solve(model, L1, self._config(algo, lam), a0)
        self.model_ = model
        self.lambda_ = lam
        self.coef_ = self.report_.coefficients
        self.restored_ = self.report_.restored
        return self

    def fit_transform(self, y, reference=None):
        return self.fit(y, reference).restored_

    def transform(self, y):
        """Deconvolve a new count image with the fitted ``lambda_``."""
        check_is_fitted(self, "lambda_")
        y = check_counts(y)
        model = self._build_model(y)
        algo = self.algo or ("tseng" if self.sweep_ is not None else "fb")
        return solve(model, L1, self._config(algo, self.lambda_), initial_coefs(model, self.init)).restored
