"""Proximity operators for the sparsity penalty and the positivity constraint.

The nonsmooth part of the objective is

    f2(a) = i_C(Phi a) + lam * sum_i psi(a_i),

where ``i_C`` is the indicator of the nonnegative orthant.  Its proximity
operator has no closed form for a general dictionary; :func:`prox_f2`
computes it by a Douglas-Rachford iteration that alternates the
(closed-form) proximity operators of the two pieces.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "Penalty",
    "L1",
    "DrConfig",
    "FEASIBILITY_TOL",
    "soft_threshold",
    "prox_penalty",
    "project_positive_coefs",
    "is_feasible",
    "prox_f2",
]

FEASIBILITY_TOL = 1e-12


def soft_threshold(g, delta):
    return np.sign(g) * np.maximum(np.abs(g) - delta, 0.0)


@dataclass(frozen=True)
class Penalty:
    """A separable sparsity penalty ``Psi(a) = sum_i psi(a_i)``.

    ``psi`` must be convex, even, nondecreasing on ``[0, inf)`` with
    ``psi(0) = 0`` and a positive right derivative at zero.  For
    ``kind="custom"`` supply ``function`` (psi), ``derivative`` (psi' on
    ``(0, inf)``) and ``right_derivative_at_zero``.
    """

    kind: str = "l1"
    function: Optional[Callable] = None
    derivative: Optional[Callable] = None
    right_derivative_at_zero: float = 1.0

    def __post_init__(self):
        if self.kind not in ("l1", "custom"):
            raise ValueError(f"unknown penalty kind {self.kind!r}")
        if self.kind == "custom" and (self.function is None or self.derivative is None):
            raise ValueError("custom penalties need both function and derivative")
        if self.right_derivative_at_zero <= 0:
            raise ValueError("psi'_+(0) must be positive")

    def __call__(self, a):
        """``Psi(a) = sum_i psi(a_i)``."""
        a = np.asarray(a, dtype=np.float64)
        if self.kind == "l1":
            return float(np.abs(a).sum())
        return float(np.sum(self.function(np.abs(a))))


L1 = Penalty("l1")


def _solve_shrinkage(penalty, delta, mag, tol=1e-10):
    """Solve ``u + delta * psi'(u) = mag`` for ``u`` in ``(0, mag)`` by bisection."""
    lo = np.zeros_like(mag)
    hi = mag.copy()
    while True:
        mid = 0.5 * (lo + hi)
        f = mid + delta * penalty.derivative(mid) - mag
        above = f > 0
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo <= tol):
            return 0.5 * (lo + hi)


def prox_penalty(penalty, delta, g):
    """Componentwise ``prox_{delta psi}(g)``.

    Entries with ``|g_i| <= delta * psi'_+(0)`` are set to zero; the others
    shrink towards zero by ``delta * psi'(u_i)`` at the solution ``u_i``.  For
    the l1 penalty this is soft-thresholding at ``delta``.
    """
    if not np.isfinite(delta) or delta < 0:
        raise ValueError(f"threshold must be finite and nonnegative, got {delta}")
    g = np.asarray(g, dtype=np.float64)
    if penalty.kind == "l1":
        return soft_threshold(g, delta * penalty.right_derivative_at_zero)
    mag = np.abs(g)
    out = np.zeros_like(g)
    active = mag > delta * penalty.right_derivative_at_zero
    if np.any(active):
        out[active] = np.sign(g[active]) * _solve_shrinkage(penalty, delta, mag[active])
    return out


def project_positive_coefs(dictionary, a):
    """``a - c^{-1} Phi^T min(Phi a, 0)``.

    Equivalent to ``c^{-1} Phi^T P_C(Phi a) + (I - c^{-1} Phi^T Phi) a``.
    For a tight frame the result ``p`` satisfies ``Phi p = max(Phi a, 0)``.
    """
    x = dictionary.synthesize(a)
    neg = np.minimum(x, 0.0)
    if not neg.any():
        return np.array(a, dtype=np.float64, copy=True)
    return a - dictionary.analyze(neg) / dictionary.frame_constant


def is_feasible(dictionary, a, tol=FEASIBILITY_TOL):
    return bool(dictionary.synthesize(a).min() >= -tol)


@dataclass(frozen=True)
class DrConfig:
    """Douglas-Rachford sub-iteration settings.

    Attributes
    ----------
    n_iter : int
        Number of sub-iterations (1 reproduces the cheap single-pass scheme).
    relaxation : float
        Constant relaxation in ``(0, 1)``.
    init : {"from_input", "zero"}
        Starting point of the sub-iteration.
    """

    n_iter: int = 1
    relaxation: float = 0.5
    init: str = "from_input"

    def __post_init__(self):
        if int(self.n_iter) < 1:
            raise ValueError("n_iter must be >= 1")
        if not 0.0 < self.relaxation < 1.0:
            raise ValueError("relaxation must lie in (0, 1)")
        if self.init not in ("from_input", "zero"):
            raise ValueError(f"unknown init {self.init!r}")


def prox_f2(dictionary, penalty, lam, a, cfg=DrConfig(), step_norms=None):
    """Proximity operator of ``i_C(Phi .) + lam * Psi`` at ``a``.

    If soft-shrinking ``a`` already lands in the feasible set, that point is
    the exact answer and is returned directly.  Otherwise the
    Douglas-Rachford iteration

        gamma <- gamma + nu * (rprox_A(rprox_B(gamma)) - gamma),

    with ``A = lam Psi + 1/2 ||. - a||^2`` and ``B`` the indicator of
    ``{Phi a >= 0}``, runs for ``cfg.n_iter`` steps and the projection of
    the final ``gamma`` is returned.

    Parameters
    ----------
    step_norms : list, optional
        If given, ``||gamma_{t+1} - gamma_t||`` is appended for every
        sub-iteration.
    """
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    a = np.asarray(a, dtype=np.float64)
    if is_feasible(dictionary, a):
        shrunk = prox_penalty(penalty, lam, a)
        if lam == 0 or is_feasible(dictionary, shrunk):
            return shrunk

    c = dictionary.frame_constant
    nu = cfg.relaxation
    gamma = a.copy() if cfg.init == "from_input" else np.zeros_like(a)
    for _ in range(int(cfg.n_iter)):
        zeta = dictionary.analyze(np.minimum(dictionary.synthesize(gamma), 0.0)) / c
        reflected = gamma - 2.0 * zeta
        p = prox_penalty(penalty, lam / 2.0, 0.5 * (a + reflected))
        update = nu * (2.0 * p - reflected - gamma)
        gamma = gamma + update
        if step_norms is not None:
            step_norms.append(float(np.linalg.norm(update)))
    return project_positive_coefs(dictionary, gamma)
