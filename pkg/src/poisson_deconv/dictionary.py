"""Synthesis dictionaries: orthobases and tight frames on 2-D images.

A dictionary ``Phi`` maps a coefficient vector of length ``n_coefs`` to an
image (:meth:`Dictionary.synthesize`); its adjoint ``Phi^T`` is the analysis
transform (:meth:`Dictionary.analyze`).  Every dictionary here satisfies
``Phi Phi^T = c I`` with ``c = frame_constant``.

Built-ins:

* :class:`IdentityDictionary` -- the pixel basis.
* :class:`OrthogonalWavelet` -- decimated periodic DWT (orthobasis).
* :class:`UndecimatedWavelet` -- translation-invariant DWT, Parseval frame.
* :class:`UnionDictionary` -- concatenation of several dictionaries.
* :class:`ScaledDictionary` -- ``s * Phi``, a tight frame with ``c = s**2 c``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_coefs, check_shape, is_power_of_two

__all__ = [
    "FILTERS",
    "Subband",
    "Dictionary",
    "IdentityDictionary",
    "OrthogonalWavelet",
    "UndecimatedWavelet",
    "UnionDictionary",
    "ScaledDictionary",
    "parse_dictionary",
]

_SQRT2 = np.sqrt(2.0)

# Orthonormal lowpass decomposition filters.  sym4 is the 8-tap
# least-asymmetric Daubechies filter, refined to machine-precision
# orthonormality.
FILTERS = {
    "haar": np.array([1.0, 1.0]) / _SQRT2,
    "db2": np.array(
        [-0.12940952255126037, 0.2241438680420134, 0.8365163037378079, 0.48296291314453416]
    ),
    "sym4": np.array(
        [
            -0.075765714789004473302,
            -0.029635527645942220403,
            0.49761866763210387689,
            0.80373875180552336728,
            0.29785779560545031424,
            -0.099219543576867952552,
            -0.012603967262004403241,
            0.03222310060383653989,
        ]
    ),
}


def _qmf(lo):
    """Highpass partner of an orthonormal lowpass filter."""
    m = np.arange(lo.size)
    return ((-1.0) ** m) * lo[::-1]


@dataclass(frozen=True)
class Subband:
    """Location of one subband inside a flat coefficient vector."""

    scale: int
    orientation: str
    offset: int
    shape: tuple

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def slice(self):
        return slice(self.offset, self.offset + self.size)


class Dictionary:
    """Base class.  Subclasses set ``shape``, ``n_coefs``, ``kind`` and
    implement ``_analyze`` / ``_synthesize`` on validated inputs."""

    kind = "tight_frame"
    shape = None
    n_coefs = None
    subbands = ()

    @property
    def n_pixels(self):
        return self.shape[0] * self.shape[1]

    @property
    def frame_constant(self):
        return 1.0

    def analyze(self, x):
        """Return ``Phi^T x`` as a flat vector of length ``n_coefs``."""
        x = check_shape(np.asarray(x, dtype=np.float64), self.shape)
        return self._analyze(x)

    def synthesize(self, a):
        """Return ``Phi a`` as an image."""
        return self._synthesize(check_coefs(a, self.n_coefs))

    def subband(self, a, index):
        sb = self.subbands[index]
        return np.asarray(a)[sb.slice].reshape(sb.shape)

    def __repr__(self):
        return f"{type(self).__name__}(shape={self.shape}, n_coefs={self.n_coefs})"


class IdentityDictionary(Dictionary):
    kind = "orthobasis"

    def __init__(self, shape):
        self.shape = (int(shape[0]), int(shape[1]))
        self.n_coefs = self.n_pixels
        self.subbands = (Subband(0, "pixel", 0, self.shape),)

    def _analyze(self, x):
        return x.ravel().copy()

    def _synthesize(self, a):
        return a.reshape(self.shape).copy()


def _check_dyadic(shape, levels):
    for side in shape:
        if not is_power_of_two(side):
            raise ValueError(f"wavelet dictionaries need power-of-two sides, got {shape}")
    if levels < 1:
        raise ValueError(f"number of scales must be >= 1, got {levels}")


class OrthogonalWavelet(Dictionary):
    """Periodic decimated 2-D wavelet transform (an orthobasis).

    Coefficients are ordered coarse to fine: the level-``J`` approximation
    first, then for ``j = J .. 1`` the three detail bands ``(LH, HL, HH)``.
    """

    kind = "orthobasis"

    def __init__(self, shape, levels=4, wavelet="sym4"):
        self.shape = (int(shape[0]), int(shape[1]))
        _check_dyadic(self.shape, levels)
        if 2**levels > min(self.shape):
            raise ValueError(f"{levels} levels exceed the size of a {self.shape} image")
        self.levels = int(levels)
        self.wavelet = wavelet
        self.lo = FILTERS[wavelet]
        self.hi = _qmf(self.lo)
        self.n_coefs = self.n_pixels

        bands = []
        h, w = self.shape[0] >> levels, self.shape[1] >> levels
        bands.append(Subband(levels, "LL", 0, (h, w)))
        offset = h * w
        for j in range(levels, 0, -1):
            h, w = self.shape[0] >> j, self.shape[1] >> j
            for orient in ("LH", "HL", "HH"):
                bands.append(Subband(j, orient, offset, (h, w)))
                offset += h * w
        self.subbands = tuple(bands)

    def _split(self, x, axis):
        # lo[k] = sum_m h[m] x[(2k + m) mod N]
        x = np.moveaxis(x, axis, 0)
        n = x.shape[0]
        k2 = 2 * np.arange(n // 2)
        lo = np.zeros((n // 2,) + x.shape[1:])
        hi = np.zeros_like(lo)
        for m, (hm, gm) in enumerate(zip(self.lo, self.hi)):
            xm = x[(k2 + m) % n]
            lo += hm * xm
            hi += gm * xm
        return np.moveaxis(lo, 0, axis), np.moveaxis(hi, 0, axis)

    def _merge(self, lo, hi, axis):
        lo = np.moveaxis(lo, axis, 0)
        hi = np.moveaxis(hi, axis, 0)
        n = 2 * lo.shape[0]
        k2 = 2 * np.arange(n // 2)
        x = np.zeros((n,) + lo.shape[1:])
        for m, (hm, gm) in enumerate(zip(self.lo, self.hi)):
            x[(k2 + m) % n] += hm * lo + gm * hi
        return np.moveaxis(x, 0, axis)

    def _analyze(self, x):
        out = [None] * len(self.subbands)
        approx = x
        idx = len(self.subbands)
        for _ in range(self.levels):
            l_, h_ = self._split(approx, 0)
            ll, lh = self._split(l_, 1)
            hl, hh = self._split(h_, 1)
            out[idx - 3 : idx] = [lh, hl, hh]
            idx -= 3
            approx = ll
        out[0] = approx
        return np.concatenate([b.ravel() for b in out])

    def _synthesize(self, a):
        approx = self.subband(a, 0)
        for i in range(1, len(self.subbands), 3):
            lh, hl, hh = (self.subband(a, i + k) for k in range(3))
            l_ = self._merge(approx, lh, 1)
            h_ = self._merge(hl, hh, 1)
            approx = self._merge(l_, h_, 0)
        return approx


def _dilated_response(filt, step, n):
    """Full-length DFT of ``filt`` upsampled by ``step`` on length ``n``."""
    taps = np.zeros(n)
    np.add.at(taps, (np.arange(filt.size) * step) % n, filt)
    return np.fft.fft(taps)


class UndecimatedWavelet(Dictionary):
    """Translation-invariant (undecimated, a trous) periodic 2-D wavelet frame.

    Each 1-D filter application is scaled by ``1/sqrt(2)`` so the frame is
    Parseval (``Phi Phi^T = I``).  The coefficient vector holds
    ``3 * levels + 1`` full-size subbands ordered like
    :class:`OrthogonalWavelet`.
    """

    kind = "tight_frame"

    def __init__(self, shape, levels=4, wavelet="sym4"):
        self.shape = (int(shape[0]), int(shape[1]))
        _check_dyadic(self.shape, levels)
        self.levels = int(levels)
        self.wavelet = wavelet
        lo = FILTERS[wavelet] / _SQRT2
        hi = _qmf(FILTERS[wavelet]) / _SQRT2
        h, w = self.shape
        n = h * w

        acc_r = np.ones(h, dtype=complex)
        acc_c = np.ones(w, dtype=complex)
        per_band = []
        for j in range(1, self.levels + 1):
            step = 2 ** (j - 1)
            lo_r, hi_r = _dilated_response(lo, step, h), _dilated_response(hi, step, h)
            lo_c, hi_c = _dilated_response(lo, step, w), _dilated_response(hi, step, w)
            per_band.append(
                (
                    j,
                    [
                        ("LH", np.outer(acc_r * lo_r, acc_c * hi_c)),
                        ("HL", np.outer(acc_r * hi_r, acc_c * lo_c)),
                        ("HH", np.outer(acc_r * hi_r, acc_c * hi_c)),
                    ],
                )
            )
            acc_r = acc_r * lo_r
            acc_c = acc_c * lo_c

        transfers = [np.outer(acc_r, acc_c)]
        bands = [Subband(self.levels, "LL", 0, self.shape)]
        for j, triple in reversed(per_band):
            for orient, t in triple:
                bands.append(Subband(j, orient, n * len(transfers), self.shape))
                transfers.append(t)
        # keep only the non-redundant half spectrum used by rfft2
        half = w // 2 + 1
        self._transfers = np.stack([t[:, :half] for t in transfers])
        self._transfers.setflags(write=False)
        self.subbands = tuple(bands)
        self.n_coefs = n * len(bands)

    def _analyze(self, x):
        X = np.fft.rfft2(x)
        coefs = np.fft.irfft2(np.conj(self._transfers) * X, s=self.shape, axes=(-2, -1))
        return coefs.ravel()

    def _synthesize(self, a):
        C = np.fft.rfft2(a.reshape((-1,) + self.shape), axes=(-2, -1))
        return np.fft.irfft2((self._transfers * C).sum(axis=0), s=self.shape)


class UnionDictionary(Dictionary):
    """Concatenation ``Phi = [Phi_1, ..., Phi_K]``.

    Analysis stacks the member coefficient blocks; synthesis sums the member
    syntheses, so ``Phi Phi^T = (c_1 + ... + c_K) I``.
    """

    kind = "tight_frame"

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ValueError("a union dictionary needs at least one member")
        shapes = {m.shape for m in members}
        if len(shapes) != 1:
            raise ValueError(f"union members disagree on image shape: {shapes}")
        self.members = members
        self.shape = members[0].shape
        self.n_coefs = sum(m.n_coefs for m in members)
        self._offsets = np.cumsum([0] + [m.n_coefs for m in members])
        bands = []
        for m, off in zip(members, self._offsets):
            bands.extend(
                Subband(b.scale, b.orientation, b.offset + int(off), b.shape) for b in m.subbands
            )
        self.subbands = tuple(bands)

    @property
    def frame_constant(self):
        return float(sum(m.frame_constant for m in self.members))

    def _analyze(self, x):
        return np.concatenate([m.analyze(x) for m in self.members])

    def _synthesize(self, a):
        out = np.zeros(self.shape)
        for m, lo, hi in zip(self.members, self._offsets[:-1], self._offsets[1:]):
            out += m.synthesize(a[lo:hi])
        return out


class ScaledDictionary(Dictionary):
    """``s * Phi`` for a base dictionary ``Phi``; tight with ``c = s**2 c_base``."""

    kind = "tight_frame"

    def __init__(self, base, scale):
        if scale == 0:
            raise ValueError("scale must be nonzero")
        self.base = base
        self.scale = float(scale)
        self.shape = base.shape
        self.n_coefs = base.n_coefs
        self.subbands = base.subbands

    @property
    def frame_constant(self):
        return self.scale**2 * self.base.frame_constant

    def _analyze(self, x):
        return self.scale * self.base.analyze(x)

    def _synthesize(self, a):
        return self.scale * self.base.synthesize(a)


def _parse_one(spec, shape):
    name, *opts = spec.split(":")
    kwargs = {}
    for opt in opts:
        key, sep, value = opt.partition("=")
        if not sep:
            raise ValueError(f"expected key=value in dictionary spec {spec!r}")
        key = key.strip().lower()
        if key == "j":
            kwargs["levels"] = int(value)
        elif key in ("wavelet", "filter"):
            if value not in FILTERS:
                raise ValueError(f"unknown wavelet filter {value!r}; choose from {sorted(FILTERS)}")
            kwargs["wavelet"] = value
        else:
            raise ValueError(f"unknown option {key!r} in dictionary spec {spec!r}")
    if name == "identity":
        if kwargs:
            raise ValueError("identity dictionary takes no options")
        return IdentityDictionary(shape)
    if name == "dwt":
        return OrthogonalWavelet(shape, **kwargs)
    if name == "tidwt":
        return UndecimatedWavelet(shape, **kwargs)
    raise ValueError(f"unknown dictionary {name!r}")


def parse_dictionary(spec, shape):
    """Build a dictionary from a selection string.

    Grammar: ``identity``, ``dwt:J=4``, ``tidwt:J=4`` (optionally
    ``:wavelet=haar|db2|sym4``), or ``union:<spec>+<spec>+...``.
    """
    spec = spec.strip()
    if spec.startswith("union:"):
        parts = [p for p in spec[len("union:") :].split("+") if p]
        return UnionDictionary([_parse_one(p, shape) for p in parts])
    return _parse_one(spec, shape)

