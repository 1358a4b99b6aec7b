"""Point-spread functions and the circular convolution operator."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_image, check_shape
from .image import read_image

__all__ = ["Psf", "make_psf", "parse_psf", "ConvOperator"]


@dataclass(frozen=True, eq=False)
class Psf:
    """A blur kernel stored with its origin at the center pixel.

    Attributes
    ----------
    kernel : ndarray, shape (kh, kw)
        Both dimensions odd.
    """

    kernel: np.ndarray

    def __post_init__(self):
        k = check_image(self.kernel, name="PSF kernel", copy=True)
        if k.shape[0] % 2 == 0 or k.shape[1] % 2 == 0:
            raise ValueError(f"PSF kernel dimensions must be odd, got {k.shape}")
        k.setflags(write=False)
        object.__setattr__(self, "kernel", k)

    @property
    def origin(self):
        return (self.kernel.shape[0] // 2, self.kernel.shape[1] // 2)

    def normalized(self):
        total = self.kernel.sum()
        if total == 0:
            raise ValueError("cannot normalize a zero-sum PSF")
        return Psf(self.kernel / total)


def make_psf(kind, size=None, sigma=None, normalize=True):
    """Construct a built-in PSF.

    Parameters
    ----------
    kind : {"moving_average", "gaussian", "delta"}
    size : int, optional
        Odd support width.  Required for ``moving_average``; for
        ``gaussian`` it defaults to ``2 * ceil(4 * sigma) + 1``.
    sigma : float, optional
        Standard deviation of the Gaussian, in pixels.
    normalize : bool
        Rescale the kernel to a unit sum.
    """
    if kind == "delta":
        kernel = np.ones((1, 1))
    elif kind == "moving_average":
        if size is None or size < 1 or size % 2 == 0:
            raise ValueError(f"moving_average size must be odd and >= 1, got {size}")
        kernel = np.ones((size, size))
    elif kind == "gaussian":
        if sigma is None or sigma <= 0:
            raise ValueError(f"gaussian sigma must be positive, got {sigma}")
        if size is None:
            size = 2 * math.ceil(4 * sigma) + 1
        if size < 1 or size % 2 == 0:
            raise ValueError(f"gaussian support must be odd, got {size}")
        r = np.arange(size) - size // 2
        g = np.exp(-(r**2) / (2 * sigma**2))
        kernel = np.outer(g, g)
    else:
        raise ValueError(f"unknown PSF kind {kind!r}")
    psf = Psf(kernel)
    return psf.normalized() if normalize else psf


def parse_psf(spec):
    """Parse ``moving_average:k | gaussian:sigma | delta | file:<path>``.

    Kernels loaded from files are normalized to a unit sum.
    """
    name, _, arg = spec.partition(":")
    if name == "delta" and not arg:
        return make_psf("delta")
    if name == "moving_average":
        try:
            k = int(arg)
        except ValueError:
            raise ValueError(f"bad moving_average size in PSF spec {spec!r}") from None
        return make_psf("moving_average", size=k)
    if name == "gaussian":
        try:
            sigma = float(arg)
        except ValueError:
            raise ValueError(f"bad gaussian sigma in PSF spec {spec!r}") from None
        return make_psf("gaussian", sigma=sigma)
    if name == "file" and arg:
        return Psf(read_image(arg)).normalized()
    raise ValueError(f"invalid PSF spec {spec!r}")


class ConvOperator:
    """Circular convolution ``x -> h * x`` on images of a fixed shape.

    The kernel is zero-padded to the image shape and shifted so that its
    center lands on pixel ``(0, 0)``; kernels larger than the image wrap
    around.  The transfer function is computed once at construction.
    """

    def __init__(self, psf, shape):
        if not isinstance(psf, Psf):
            psf = Psf(psf)
        self.psf = psf
        self.shape = (int(shape[0]), int(shape[1]))
        h, w = self.shape
        kh, kw = psf.kernel.shape
        oy, ox = psf.origin
        padded = np.zeros(self.shape)
        rows = (np.arange(kh) - oy) % h
        cols = (np.arange(kw) - ox) % w
        np.add.at(padded, (rows[:, None], cols[None, :]), psf.kernel)
        self.transfer = np.fft.rfft2(padded)
        self.transfer.setflags(write=False)
        # 1x1 kernels are a pure scaling; skip the FFT so delta is exact
        self._gain = float(psf.kernel[0, 0]) if psf.kernel.size == 1 else None

    def apply(self, x):
        """Return ``h * x`` (periodic boundary)."""
        x = check_shape(np.asarray(x, dtype=np.float64), self.shape)
        if self._gain is not None:
            return self._gain * x
        return np.fft.irfft2(self.transfer * np.fft.rfft2(x), s=self.shape)

    def apply_adjoint(self, y):
        """Return ``H^T y``: correlation with the kernel (convolution with its flip)."""
        y = check_shape(np.asarray(y, dtype=np.float64), self.shape)
        if self._gain is not None:
            return self._gain * y
        return np.fft.irfft2(np.conj(self.transfer) * np.fft.rfft2(y), s=self.shape)

    def spectral_norm(self):
        """Exact operator 2-norm: the largest transfer-function magnitude."""
        return float(np.abs(self.transfer).max())
