"""Image I/O, synthetic phantoms, Poisson degradation and quality metrics.

Images are plain 2-D ``float64`` arrays of shape ``(height, width)``, stored
row-major.  Two on-disk formats are supported:

* PGM, both ``P2`` (ASCII) and ``P5`` (binary), ``maxval <= 65535``;
  samples are big-endian 16-bit when ``maxval > 255``.
* ``rawf32``: little-endian IEEE float32, row-major, with a JSON sidecar
  ``<stem>.json`` holding ``{"width": W, "height": H, "dtype": "f32"}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._validation import check_image

PGM_MAXVAL = 65535

__all__ = [
    "ImageIOError",
    "MalformedHeaderError",
    "SizeMismatchError",
    "UnreadableImageError",
    "MetricReport",
    "read_image",
    "write_image",
    "sidecar_path",
    "phantom",
    "rescale_peak",
    "poissonize",
    "metrics",
]


class ImageIOError(ValueError):
    """Base class for image decoding/encoding failures."""


class MalformedHeaderError(ImageIOError):
    pass


class SizeMismatchError(ImageIOError):
    pass


class UnreadableImageError(ImageIOError):
    pass


# --------------------------------------------------------------------------
# File I/O
# --------------------------------------------------------------------------

def _guess_format(path):
    suffix = Path(path).suffix.lower()
    if suffix in (".pgm", ".pnm"):
        return "pgm"
    if suffix in (".raw", ".f32", ".rawf32", ".bin"):
        return "rawf32"
    raise ValueError(f"cannot infer image format from suffix {suffix!r}; pass format=")


def sidecar_path(path):
    """Return the JSON sidecar path that accompanies a rawf32 file."""
    return Path(path).with_suffix(".json")


def _pgm_tokens(buf, count):
    """Pull ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the single whitespace byte
    that terminates the last token.
    """
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise MalformedHeaderError("truncated PGM header")
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
            pos += 1
        tokens.append(buf[start:pos])
    return tokens, pos + 1


def _read_pgm(data):
    if len(data) < 2 or data[:2] not in (b"P2", b"P5"):
        raise MalformedHeaderError("not a P2/P5 PGM file (bad magic number)")
    tokens, offset = _pgm_tokens(data, 4)
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MalformedHeaderError(f"non-integer PGM header field: {exc}") from None
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"invalid PGM dimensions {width}x{height}")
    if not 0 < maxval <= PGM_MAXVAL:
        raise MalformedHeaderError(f"PGM maxval {maxval} outside (0, 65535]")
    n = width * height
    if tokens[0] == b"P2":
        try:
            values = np.array([int(t) for t in data[offset - 1 :].split()], dtype=np.float64)
        except ValueError:
            raise MalformedHeaderError("non-integer sample in P2 body") from None
        if values.size != n:
            raise SizeMismatchError(
                f"P2 PGM declares {width}x{height}={n} samples but contains {values.size}"
            )
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        body = data[offset:]
        if len(body) != n * dtype.itemsize:
            raise SizeMismatchError(
                f"P5 PGM declares {n} samples ({n * dtype.itemsize} bytes) "
                f"but body has {len(body)} bytes"
            )
        values = np.frombuffer(body, dtype=dtype).astype(np.float64)
    return values.reshape(height, width)


def _read_rawf32(path):
    meta_path = sidecar_path(path)
    try:
        meta = json.loads(meta_path.read_text())
    except OSError as exc:
        raise UnreadableImageError(f"cannot read sidecar {meta_path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"sidecar {meta_path} is not valid JSON: {exc}") from None
    try:
        width, height = int(meta["width"]), int(meta["height"])
    except (KeyError, TypeError, ValueError):
        raise MalformedHeaderError(f"sidecar {meta_path} lacks integer width/height") from None
    if meta.get("dtype", "f32") != "f32":
        raise MalformedHeaderError(f"unsupported rawf32 dtype {meta.get('dtype')!r}")
    if width < 1 or height < 1:
        raise MalformedHeaderError(f"invalid dimensions {width}x{height} in sidecar")
    try:
        body = Path(path).read_bytes()
    except OSError as exc:
        raise UnreadableImageError(f"cannot read {path}: {exc}") from None
    if len(body) != 4 * width * height:
        raise SizeMismatchError(
            f"sidecar declares {width}x{height} floats ({4 * width * height} bytes) "
            f"but {path} has {len(body)} bytes"
        )
    return np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(height, width)


def read_image(path, format=None):
    """Read an image from ``path``.

    Parameters
    ----------
    path : str or path-like
    format : {"pgm", "rawf32"}, optional
        Inferred from the suffix when omitted.

    Returns
    -------
    ndarray of float64, shape (height, width)
    """
    fmt = format or _guess_format(path)
    if fmt == "rawf32":
        img = _read_rawf32(path)
    elif fmt == "pgm":
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise UnreadableImageError(f"cannot read {path}: {exc}") from None
        img = _read_pgm(data)
    else:
        raise ValueError(f"unknown image format {fmt!r}")
    if not np.all(np.isfinite(img)):
        raise ImageIOError(f"{path} contains non-finite values")
    return img


def write_image(img, path, format=None, ascii=False):
    """Write ``img`` to ``path``.

    PGM output is clamped to ``[0, 65535]`` and rounded to the nearest
    integer; it is written as ``P5`` unless ``ascii`` is set.  rawf32 output
    is lossless for values representable in float32.
    """
    img = check_image(img)
    fmt = format or _guess_format(path)
    path = Path(path)
    height, width = img.shape
    if fmt == "rawf32":
        path.write_bytes(img.astype("<f4").tobytes())
        meta = {"width": width, "height": height, "dtype": "f32"}
        sidecar_path(path).write_text(json.dumps(meta))
    elif fmt == "pgm":
        q = np.rint(np.clip(img, 0, PGM_MAXVAL)).astype(np.int64)
        if ascii:
            rows = "\n".join(" ".join(str(v) for v in row) for row in q)
            path.write_text(f"P2\n{width} {height}\n{PGM_MAXVAL}\n{rows}\n")
        else:
            header = f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii")
            path.write_bytes(header + q.astype(">u2").tobytes())
    else:
        raise ValueError(f"unknown image format {fmt!r}")


# --------------------------------------------------------------------------
# Phantoms
# --------------------------------------------------------------------------

_LINES_GAUSSIANS_DEFAULTS = {
    # positions are fractions of (height, width)
    "points": [(0.08, 0.08, 1.0), (0.08, 0.2, 0.6), (0.2, 0.08, 0.35), (0.2, 0.2, 0.15)],
    "gaussians": [(0.3, 0.7, 0.05, 0.9), (0.7, 0.3, 0.08, 0.7), (0.72, 0.72, 0.035, 1.0)],
    "lines": [
        ((0.45, 0.1), (0.95, 0.55), 0.8),
        ((0.1, 0.45), (0.55, 0.95), 0.5),
        ((0.5, 0.55), (0.9, 0.95), 0.65),
    ],
    "background": 0.0,
}


def _draw_segment(img, p0, p1, amplitude):
    h, w = img.shape
    (r0, c0), (r1, c1) = (p0[0] * (h - 1), p0[1] * (w - 1)), (p1[0] * (h - 1), p1[1] * (w - 1))
    n = int(np.ceil(2 * max(abs(r1 - r0), abs(c1 - c0)))) + 1
    rows = np.rint(np.linspace(r0, r1, n)).astype(int)
    cols = np.rint(np.linspace(c0, c1, n)).astype(int)
    img[rows, cols] = np.maximum(img[rows, cols], amplitude)


def _lines_gaussians(height, width, params):
    if height < 16 or width < 16:
        raise ValueError("lines_gaussians needs width, height >= 16")
    p = {**_LINES_GAUSSIANS_DEFAULTS, **(params or {})}
    img = np.zeros((height, width))
    rr, cc = np.mgrid[0:height, 0:width]
    for fr, fc, fs, amp in p["gaussians"]:
        r0, c0, s = fr * (height - 1), fc * (width - 1), fs * min(height, width)
        img += amp * np.exp(-((rr - r0) ** 2 + (cc - c0) ** 2) / (2 * s * s))
    for p0, p1, amp in p["lines"]:
        _draw_segment(img, p0, p1, amp)
    for fr, fc, amp in p["points"]:
        img[int(round(fr * (height - 1))), int(round(fc * (width - 1)))] = amp
    return img + p["background"]


def phantom(kind, width, height, **params):
    """Build a synthetic nonnegative test image.

    Parameters
    ----------
    kind : {"lines_gaussians", "point_grid", "flat"}
        ``lines_gaussians`` draws isolated point sources in the upper-left
        corner, isotropic Gaussian blobs and straight line segments.
        ``point_grid`` places single pixels of ``amplitude`` every
        ``spacing`` pixels (first one at ``spacing // 2``).  ``flat`` is the
        constant ``value``.
    width, height : int
    **params
        Kind-specific overrides: ``points``, ``gaussians``, ``lines``,
        ``background`` for lines_gaussians; ``spacing``, ``amplitude`` for
        point_grid; ``value`` for flat.
    """
    width, height = int(width), int(height)
    if width < 1 or height < 1:
        raise ValueError(f"image dimensions must be positive, got {width}x{height}")
    if kind == "flat":
        value = float(params.get("value", 1.0))
        if value < 0:
            raise ValueError("flat phantom value must be nonnegative")
        return np.full((height, width), value)
    if kind == "point_grid":
        spacing = int(params.get("spacing", 8))
        amplitude = float(params.get("amplitude", 1.0))
        if spacing < 1 or amplitude < 0:
            raise ValueError("point_grid needs spacing >= 1 and amplitude >= 0")
        img = np.zeros((height, width))
        img[spacing // 2 :: spacing, spacing // 2 :: spacing] = amplitude
        return img
    if kind == "lines_gaussians":
        return _lines_gaussians(height, width, params)
    raise ValueError(f"unknown phantom kind {kind!r}")


# --------------------------------------------------------------------------
# Degradation
# --------------------------------------------------------------------------

def rescale_peak(img, peak):
    """Linearly rescale a nonnegative image so that its maximum is ``peak``."""
    img = check_image(img)
    if peak <= 0:
        raise ValueError("peak must be positive")
    if img.min() < 0:
        raise ValueError("rescale_peak expects a nonnegative image")
    top = img.max()
    if top <= 0:
        raise ValueError("cannot rescale an all-zero image")
    if top == peak:
        return img.copy()
    return img * (peak / top)


def poissonize(mean, seed):
    """Draw an independent Poisson count per pixel with the given mean field.

    The generator is created per call from ``seed`` so the draw is fully
    reproducible and never touches global random state.
    """
    mean = check_image(mean)
    if mean.min() < 0:
        raise ValueError("Poisson mean must be nonnegative")
    rng = np.random.default_rng(seed)
    return rng.poisson(mean).astype(np.float64)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    mae: float
    mse: float
    peak_intensity: float

    @property
    def normalized_mae(self):
        """MAE divided by the reference peak intensity."""
        return self.mae / self.peak_intensity if self.peak_intensity > 0 else float("nan")

    def as_dict(self):
        return {
            "mae": self.mae,
            "mse": self.mse,
            "normalized_mae": self.normalized_mae,
            "peak_intensity": self.peak_intensity,
        }


def metrics(reference, estimate):
    """Per-pixel mean absolute and mean squared error."""
    reference = check_image(reference)
    estimate = check_image(estimate)
    if reference.shape != estimate.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {estimate.shape}")
    diff = reference - estimate
    return MetricReport(
        mae=float(np.mean(np.abs(diff))),
        mse=float(np.mean(diff * diff)),
        peak_intensity=float(reference.max()),
    )

