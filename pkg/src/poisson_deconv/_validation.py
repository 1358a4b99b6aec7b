"""Input validation helpers shared across modules."""

import numbers

import numpy as np


def check_image(img, name="image", copy=False):
    """Return ``img`` as a finite 2-D float64 array or raise ``ValueError``."""
    arr = np.array(img, dtype=np.float64, copy=copy) if copy else np.asarray(img, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_shape(arr, shape, name="image"):
    if arr.shape != tuple(shape):
        raise ValueError(f"{name} has shape {arr.shape}, expected {tuple(shape)}")
    return arr


def check_coefs(a, n_coefs, name="coefficients"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or a.size != n_coefs:
        raise ValueError(f"{name} must be a vector of length {n_coefs}, got shape {a.shape}")
    return a


def check_scalar(x, name, min_val=None, max_val=None, include_min=True, include_max=True):
    if not isinstance(x, numbers.Real) or isinstance(x, bool):
        raise TypeError(f"{name} must be a real number, got {type(x).__name__}")
    x = float(x)
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite")
    if min_val is not None and (x < min_val or (x == min_val and not include_min)):
        raise ValueError(f"{name}={x} is below its allowed range")
    if max_val is not None and (x > max_val or (x == max_val and not include_max)):
        raise ValueError(f"{name}={x} is above its allowed range")
    return x


def is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0
