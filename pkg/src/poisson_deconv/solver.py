"""Forward-backward and Tseng-type solvers for the stabilized problem

    min_a  f1(a) + i_C(Phi a) + lam * Psi(a).
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, replace as _replace
from typing import List, Union

import numpy as np

from .prox import L1, DrConfig, project_positive_coefs, prox_f2, prox_penalty

__all__ = [
    "SolverError",
    "SolverConfig",
    "SolverReport",
    "Objective",
    "objective",
    "auto_step",
    "initial_coefs",
    "solve",
    "solve_fb",
    "solve_tseng",
    "write_history_csv",
]

logger = logging.getLogger(__name__)

INFEASIBLE_TOL = 1e-9
AUTO_STEP_FACTOR = 0.9
MAX_BACKTRACKS = 60


class SolverError(ArithmeticError):
    """Raised when an iteration diverges or the step search fails."""


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs shared by both algorithms.

    ``mu`` is the constant forward-backward step (``"auto"`` picks 0.9 of
    the admissible supremum).  ``tau``, ``theta`` and ``sigma`` drive the
    backtracking step search of the Tseng variant.  ``tol > 0`` stops early
    once ``||a_{t+1} - a_t|| <= tol * ||a_t||``.
    """

    algo: str = "fb"
    lam: float = 0.1
    mu: Union[float, str] = "auto"
    n_iter: int = 200
    beta: float = 1.0
    dr: DrConfig = field(default_factory=DrConfig)
    tau: float = 0.5
    theta: float = 0.9
    sigma: float = 1.0
    tol: float = 0.0
    record_history: bool = True
    tseng_prox: str = "full"

    def __post_init__(self):
        if self.algo not in ("fb", "tseng"):
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.mu != "auto" and not (isinstance(self.mu, (int, float)) and self.mu > 0):
            raise ValueError("mu must be positive or 'auto'")
        if int(self.n_iter) < 0:
            raise ValueError("n_iter must be nonnegative")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")
        if not 0.0 < self.tau < 1.0 or not 0.0 < self.theta < 1.0 or self.sigma <= 0:
            raise ValueError("need tau, theta in (0, 1) and sigma > 0")
        if self.tseng_prox not in ("full", "penalty"):
            raise ValueError(f"unknown tseng_prox {self.tseng_prox!r}")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")

    def replace(self, **changes):
        return _replace(self, **changes)


@dataclass
class SolverReport:
    coefficients: np.ndarray
    restored: np.ndarray
    objective_history: List[float]
    support_size: int
    iterations_run: int
    mu_used: Union[float, List[float]]
    support_history: List[int] = field(default_factory=list)
    step_norms: List[float] = field(default_factory=list)
    converged: bool = False

    @property
    def last_mu(self):
        return self.mu_used[-1] if isinstance(self.mu_used, list) else self.mu_used

    @property
    def final_objective(self):
        return self.objective_history[-1] if self.objective_history else float("nan")


@dataclass(frozen=True)
class Objective:
    """Finite part of the objective plus the feasibility of ``Phi a >= 0``.

    ``value`` is ``+inf`` whenever ``feasible`` is False.
    """

    finite_part: float
    feasible: bool
    min_pixel: float

    @property
    def value(self):
        return self.finite_part if self.feasible else float("inf")


def objective(model, penalty, lam, a):
    """``f1(a) + i_C(Phi a) + lam * Psi(a)``."""
    x = model.dictionary.synthesize(a)
    min_pixel = float(x.min())
    finite = model.value_eta(model.conv.apply(x)) + lam * penalty(a)
    return Objective(finite, min_pixel >= -INFEASIBLE_TOL, min_pixel)


def auto_step(model, factor=AUTO_STEP_FACTOR):
    """``factor * 2 / kappa``; for b = 3/8, ``0.9 (3/2)^{3/2} / (2 c ||H||^2 ||z||_inf)``."""
    return factor * model.max_step()


def initial_coefs(model, init="zero"):
    """Starting coefficients.

    ``"zero"`` is the all-zero vector.  ``"analysis"`` analyzes the
    algebraic inverse of the stabilization, ``c^{-1} Phi^T max((z/2)^2 - b, 0)``.
    """
    d = model.dictionary
    if init == "zero":
        return np.zeros(d.n_coefs)
    if init == "analysis":
        counts = np.maximum((model.z / 2.0) ** 2 - model.offset, 0.0)
        return d.analyze(counts) / d.frame_constant
    raise ValueError(f"unknown init {init!r}")


def _support(a, threshold):
    return int(np.count_nonzero(np.abs(a) >= threshold))


def _check_finite(obj, it):
    if not np.isfinite(obj.finite_part):
        raise SolverError(f"objective became non-finite at iteration {it}")


def solve_fb(model, penalty=L1, cfg=SolverConfig(), a0=None):
    """Relaxed forward-backward iteration with constant step.

    ``a <- a + beta * (prox_{mu f2}(a - mu grad f1(a)) - a)``, where the
    prox of ``mu f2`` is :func:`prox_f2` at threshold ``lam * mu``.
    """
    d = model.dictionary
    mu = auto_step(model) if cfg.mu == "auto" else float(cfg.mu)
    if mu >= model.max_step():
        warnings.warn(
            f"step {mu:.4g} is not below the convergence bound {model.max_step():.4g}",
            RuntimeWarning,
            stacklevel=2,
        )
    a = np.zeros(d.n_coefs) if a0 is None else np.array(a0, dtype=np.float64, copy=True)
    thr = cfg.lam * mu
    history, supports, steps = [], [], []
    converged = False
    it = 0
    for it in range(1, int(cfg.n_iter) + 1):
        grad = model.gradient(a)
        target = prox_f2(d, penalty, thr, a - mu * grad, cfg.dr)
        step = cfg.beta * (target - a)
        a = a + step
        step_norm = float(np.linalg.norm(step))
        if cfg.record_history:
            obj = objective(model, penalty, cfg.lam, a)
            _check_finite(obj, it)
            history.append(obj.finite_part)
            supports.append(_support(a, thr))
            steps.append(step_norm)
        elif not np.all(np.isfinite(a)):
            raise SolverError(f"iterate became non-finite at iteration {it}")
        if cfg.tol > 0 and step_norm <= cfg.tol * max(float(np.linalg.norm(a)), 1e-300):
            converged = True
            break
    logger.debug("fb finished after %d iterations (mu=%.4g)", it, mu)
    return SolverReport(
        coefficients=a,
        restored=d.synthesize(a),
        objective_history=history,
        support_size=_support(a, thr),
        iterations_run=it,
        mu_used=mu,
        support_history=supports,
        step_norms=steps,
        converged=converged,
    )


def solve_tseng(model, penalty=L1, cfg=SolverConfig(algo="tseng"), a0=None):
    """Forward-backward-forward iteration with a backtracking step.

    Each iteration takes ``a_half = prox_{lam mu Psi}(a - mu grad(a))`` with
    the largest ``mu`` in ``sigma * tau**k`` such that
    ``mu ||grad(a_half) - grad(a)|| <= theta ||a_half - a||``, then sets
    ``a = P(a_half - mu (grad(a_half) - grad(a)))`` with ``P`` the
    positivity projection.  The starting point is projected first.
    """
    d = model.dictionary
    start = np.zeros(d.n_coefs) if a0 is None else np.asarray(a0, dtype=np.float64)
    a = project_positive_coefs(d, start)
    history, supports, steps, mus = [], [], [], []
    converged = False
    it = 0
    for it in range(1, int(cfg.n_iter) + 1):
        grad = model.gradient(a)
        mu = cfg.sigma
        for _ in range(MAX_BACKTRACKS + 1):
            if cfg.tseng_prox == "full":
                a_half = prox_f2(d, penalty, cfg.lam * mu, a - mu * grad, cfg.dr)
            else:
                a_half = prox_penalty(penalty, cfg.lam * mu, a - mu * grad)
            grad_half = model.gradient(a_half)
            dgrad = grad_half - grad
            if mu * np.linalg.norm(dgrad) <= cfg.theta * np.linalg.norm(a_half - a):
                break
            mu *= cfg.tau
        else:
            raise SolverError(
                f"step search exhausted {MAX_BACKTRACKS} reductions at iteration {it}"
            )
        a_next = project_positive_coefs(d, a_half - mu * dgrad)
        step_norm = float(np.linalg.norm(a_next - a))
        a = a_next
        mus.append(mu)
        if cfg.record_history:
            obj = objective(model, penalty, cfg.lam, a)
            _check_finite(obj, it)
            history.append(obj.finite_part)
            supports.append(_support(a, cfg.lam * mu))
            steps.append(step_norm)
        elif not np.all(np.isfinite(a)):
            raise SolverError(f"iterate became non-finite at iteration {it}")
        if cfg.tol > 0 and step_norm <= cfg.tol * max(float(np.linalg.norm(a)), 1e-300):
            converged = True
            break
    last_mu = mus[-1] if mus else cfg.sigma
    return SolverReport(
        coefficients=a,
        restored=d.synthesize(a),
        objective_history=history,
        support_size=_support(a, cfg.lam * last_mu),
        iterations_run=it,
        mu_used=mus,
        support_history=supports,
        step_norms=steps,
        converged=converged,
    )


def solve(model, penalty=L1, cfg=SolverConfig(), a0=None):
    """Dispatch on ``cfg.algo``."""
    if cfg.algo == "fb":
        return solve_fb(model, penalty, cfg, a0)
    return solve_tseng(model, penalty, cfg, a0)


def write_history_csv(report, path):
    """Per-iteration log: iteration, objective, support_size, mu, step_norm."""
    mus = report.mu_used if isinstance(report.mu_used, list) else None
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "support_size", "mu", "step_norm"])
        for i, (obj, supp, step) in enumerate(
            zip(report.objective_history, report.support_history, report.step_norms), start=1
        ):
            mu = mus[i - 1] if mus is not None else report.mu_used
            writer.writerow([i, repr(obj), supp, repr(mu), repr(step)])
