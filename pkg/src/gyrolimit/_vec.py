"""Small array helpers shared by every module.

The perpendicular convention is fixed here and nowhere else:
(a, b)^perp = (-b, a), i.e. a +90 degree rotation.
"""

from __future__ import annotations

from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

FloatArray = NDArray[np.float64]


def perp(a: FloatArray) -> FloatArray:
    """Rotate 2-vectors (last axis) by +90 degrees."""
    a = np.asarray(a, dtype=np.float64)
    out = np.empty_like(a)
    out[..., 0] = -a[..., 1]
    out[..., 1] = a[..., 0]
    return out


def rotate(a: FloatArray, angle: float) -> FloatArray:
    """Counterclockwise rotation of 2-vectors by ``angle``."""
    c, s = np.cos(angle), np.sin(angle)
    out = np.empty_like(a)
    out[..., 0] = c * a[..., 0] - s * a[..., 1]
    out[..., 1] = s * a[..., 0] + c * a[..., 1]
    return out


def as_points(x: FloatArray | Sequence[Sequence[float]], name: str = "points") -> FloatArray:
    """Coerce to a contiguous (N, 2) float64 array of finite values."""
    arr = np.ascontiguousarray(np.asarray(x, dtype=np.float64))
    if arr.ndim == 1 and arr.shape[0] == 2:
        arr = arr.reshape(1, 2)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"{name} must have shape (N, 2), got {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_weights(w: FloatArray | Sequence[float], n: int, name: str = "weights") -> FloatArray:
    arr = np.ascontiguousarray(np.asarray(w, dtype=np.float64)).reshape(-1)
    if arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if (arr < 0).any():
        raise ValueError(f"{name} must be non-negative")
    return arr
