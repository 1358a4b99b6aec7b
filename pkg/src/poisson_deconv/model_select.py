"""Choosing the regularization parameter by generalized cross-validation.

The effective degrees of freedom are estimated by the size of the support
of the solution, ``#{i : |a_i| >= lam * mu}``, which turns

    GCV(lam) = ||z - 2 sqrt(H Phi a* + b)||^2 / (n - df)^2

into something computable from a single solve per ``lam``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .image import metrics
from .prox import L1
from .solver import SolverConfig, SolverError, solve_fb

__all__ = [
    "GcvPoint",
    "SweepResult",
    "degrees_of_freedom",
    "gcv",
    "lambda_scale",
    "lambda_grid",
    "parse_grid",
    "sweep_lambda",
    "write_sweep_csv",
]

logger = logging.getLogger(__name__)


@dataclass
class GcvPoint:
    lam: float
    gcv: float
    df: int
    residual_ss: float
    mae: Optional[float] = None
    mse: Optional[float] = None
    failed: bool = False
    error: Optional[str] = None


@dataclass
class SweepResult:
    points: List[GcvPoint]
    best_lambda: float
    reports: list = field(default_factory=list, repr=False)

    @property
    def best_index(self):
        return next(i for i, p in enumerate(self.points) if p.lam == self.best_lambda)

    @property
    def best_point(self):
        return self.points[self.best_index]


def degrees_of_freedom(a, lam, mu):
    """Number of coefficients with magnitude at least ``lam * mu``."""
    threshold = lam * mu
    if threshold < 0:
        raise ValueError("lam * mu must be nonnegative")
    return int(np.count_nonzero(np.abs(np.asarray(a)) >= threshold))


def _gcv_value(residual_ss, n, df):
    if df >= n:
        return math.inf
    return residual_ss / float(n - df) ** 2


def gcv(model, report, lam, mu=None):
    """GCV score of a solver report obtained at ``lam``.

    ``mu`` defaults to the step recorded in the report (the last accepted
    step for the Tseng solver).
    """
    mu = report.last_mu if mu is None else mu
    df = degrees_of_freedom(report.coefficients, lam, mu)
    rss = model.residual_ss(report.coefficients)
    return GcvPoint(lam=float(lam), gcv=_gcv_value(rss, model.n_pixels, df), df=df, residual_ss=rss)


def lambda_scale(model):
    """``max |grad f1(0)|``: above this every coefficient is thresholded away
    on the first forward-backward step from zero."""
    return float(np.abs(model.gradient(np.zeros(model.dictionary.n_coefs))).max())


def lambda_grid(model, num=12, low=1e-3, high=1.0, relative=True, spacing="log"):
    """Grid of ``num`` values between ``low`` and ``high``, times
    :func:`lambda_scale` when ``relative``."""
    if num < 1 or low <= 0 or high < low:
        raise ValueError("need num >= 1 and 0 < low <= high")
    grid = np.geomspace(low, high, num) if spacing == "log" else np.linspace(low, high, num)
    if relative:
        grid = grid * lambda_scale(model)
    return [float(v) for v in grid]


def parse_grid(spec):
    """Parse ``low:high:num[log|lin]`` into ``(low, high, num, spacing)``."""
    try:
        low, high, tail = spec.split(":")
        spacing = "log"
        for suffix in ("log", "lin"):
            if tail.endswith(suffix):
                spacing, tail = suffix, tail[: -len(suffix)]
        return float(low), float(high), int(tail), spacing
    except ValueError:
        raise ValueError(f"grid spec must look like '1e-3:1:12log', got {spec!r}") from None


def sweep_lambda(model, penalty=L1, base_cfg=SolverConfig(), grid=None, reference=None,
                 a0=None, keep_reports=False):
    """Solve once per ``lam`` in ``grid`` with forward-backward and score each.

    A solver failure at one grid point marks that point as failed (with an
    infinite GCV) instead of aborting the sweep.

    Returns
    -------
    SweepResult
        Points in grid order and the ``lam`` with the smallest GCV.
    """
    grid = lambda_grid(model) if grid is None else [float(v) for v in grid]
    if not grid:
        raise ValueError("lambda grid is empty")
    if any(v <= 0 for v in grid) or any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be positive and sorted ascending")

    points, reports = [], []
    for lam in grid:
        cfg = base_cfg.replace(algo="fb", lam=lam)
        try:
            report = solve_fb(model, penalty, cfg, a0)
        except (SolverError, FloatingPointError) as exc:
            logger.warning("solve failed at lam=%g: %s", lam, exc)
            points.append(GcvPoint(lam, math.inf, 0, math.nan, failed=True, error=str(exc)))
            reports.append(None)
            continue
        point = gcv(model, report, lam)
        if reference is not None:
            m = metrics(reference, report.restored)
            point.mae, point.mse = m.mae, m.mse
        points.append(point)
        reports.append(report if keep_reports else None)

    scores = [p.gcv for p in points]
    best = points[int(np.argmin(scores))].lam
    return SweepResult(points, best, reports if keep_reports else [])


def write_sweep_csv(result, path):
    """CSV with columns lambda, gcv, df, residual_ss[, mae, mse], selected."""
    with_ref = any(p.mae is not None for p in result.points)
    header = ["lambda", "gcv", "df", "residual_ss"]
    if with_ref:
        header += ["mae", "mse"]
    header.append("selected")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for p in result.points:
            row = [repr(p.lam), repr(p.gcv), p.df, repr(p.residual_ss)]
            if with_ref:
                row += [repr(p.mae), repr(p.mse)]
            row.append(int(p.lam == result.best_lambda))
            writer.writerow(row)
