"""Anscombe variance stabilization and the stabilized data-fidelity term.

With ``z = 2 sqrt(y + b)`` the fidelity on coefficients ``a`` is

    f1(a) = sum_i 1/2 (z_i - 2 sqrt(eta_i + b))^2,   eta = H Phi a,

whose gradient is ``Phi^T H^T grad_F(eta)`` with
``grad_F(eta)_i = 2 - z_i / sqrt(eta_i + b)``.
"""

from __future__ import annotations

import numpy as np

from ._validation import check_image, check_shape
from .operators import ConvOperator

__all__ = ["ANSCOMBE_OFFSET", "BIAS_CORRECTED_OFFSET", "anscombe", "FidelityModel"]

ANSCOMBE_OFFSET = 3.0 / 8.0
BIAS_CORRECTED_OFFSET = 1.0 / 8.0


def anscombe(y, offset=ANSCOMBE_OFFSET):
    """Elementwise ``2 * sqrt(y + offset)`` for nonnegative counts ``y``."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0):
        raise ValueError("Anscombe transform needs nonnegative counts")
    if offset <= 0:
        raise ValueError("offset must be positive")
    return 2.0 * np.sqrt(y + offset)


class FidelityModel:
    """Stabilized observation together with the blur and the dictionary.

    Parameters
    ----------
    z : array, shape (h, w)
        Stabilized observation (use :meth:`from_counts` to start from counts).
    conv : ConvOperator
    dictionary : Dictionary
    offset : float
        The constant ``b`` inside the square root; 3/8 or 1/8.

    Notes
    -----
    Negative blurred values are handled by extending each pixel term
    linearly below ``eta = 0`` (value and slope matched at zero).  On the
    nonnegative orthant this is the exact model; elsewhere it keeps ``f1``
    convex, finite and differentiable, and the gradient equals the usual
    formula evaluated at ``max(eta, 0)``.
    """

    def __init__(self, z, conv, dictionary, offset=ANSCOMBE_OFFSET):
        z = check_image(z, name="z", copy=True)
        if conv.shape != z.shape or dictionary.shape != z.shape:
            raise ValueError(
                f"shape mismatch: z {z.shape}, operator {conv.shape}, dictionary {dictionary.shape}"
            )
        if offset <= 0:
            raise ValueError("offset must be positive")
        z.setflags(write=False)
        self.z = z
        self.conv = conv
        self.dictionary = dictionary
        self.offset = float(offset)
        self.z_inf = float(np.abs(z).max())
        self.op_norm = conv.spectral_norm()
        c = dictionary.frame_constant
        self.kappa_bound = c * self.op_norm**2 * self.z_inf / 2.0 * self.offset ** (-1.5)

    @classmethod
    def from_counts(cls, y, conv, dictionary, offset=ANSCOMBE_OFFSET):
        return cls(anscombe(check_image(y, name="counts"), offset), conv, dictionary, offset)

    @property
    def shape(self):
        return self.z.shape

    @property
    def n_pixels(self):
        return self.z.size

    def blurred(self, a):
        """``H Phi a``."""
        return self.conv.apply(self.dictionary.synthesize(a))

    def _terms(self, eta):
        b = self.offset
        pos = np.maximum(eta, 0.0)
        root = np.sqrt(pos + b)
        grad_F = 2.0 - self.z / root
        value = 0.5 * (self.z - 2.0 * root) ** 2
        neg = eta < 0
        if np.any(neg):
            value = np.where(neg, value + grad_F * eta, value)
        return value, grad_F

    def value_eta(self, eta):
        """``F(eta)``, the fidelity as a function of the blurred image."""
        eta = check_shape(np.asarray(eta, dtype=np.float64), self.shape)
        return float(self._terms(eta)[0].sum())

    def value(self, a):
        """``f1(a)``."""
        v = float(self._terms(self.blurred(a))[0].sum())
        if not np.isfinite(v):
            raise FloatingPointError("non-finite fidelity value")
        return v

    def gradient(self, a):
        """``Phi^T H^T grad_F(H Phi a)``."""
        _, grad_F = self._terms(self.blurred(a))
        g = self.dictionary.analyze(self.conv.apply_adjoint(grad_F))
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite fidelity gradient")
        return g

    def value_and_gradient(self, a):
        value, grad_F = self._terms(self.blurred(a))
        return float(value.sum()), self.dictionary.analyze(self.conv.apply_adjoint(grad_F))

    def residual_ss(self, a):
        """``||z - 2 sqrt(max(H Phi a, 0) + b)||^2``."""
        eta = np.maximum(self.blurred(a), 0.0)
        r = self.z - 2.0 * np.sqrt(eta + self.offset)
        return float(np.sum(r * r))

    def lipschitz_bound(self):
        """Upper bound on the Lipschitz constant of :meth:`gradient`.

        ``c ||H||^2 ||z||_inf / 2 * b^(-3/2)``; for ``b = 3/8`` this is
        ``(2/3)^(3/2) * 4 * c * ||H||^2 * ||z||_inf``.
        """
        return self.kappa_bound

    def max_step(self):
        """Supremum of admissible constant forward-backward steps, ``2 / kappa``."""
        return 2.0 / self.kappa_bound
