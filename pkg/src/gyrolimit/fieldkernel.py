"""Field kernel x/|x|^2, its algebraic blob regularization and pairwise
field summation.

Fields are accumulated per target in ascending source order, and parallelism
(numba ``prange``) only splits the target loop, so results are bitwise
independent of the thread count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ._vec import FloatArray, as_points, as_weights, perp
from .errors import DomainError, ParameterError

__all__ = [
    "BlobParams",
    "TreeParams",
    "singular_kernel",
    "blob_kernel",
    "direct_field",
    "tree_field",
    "h_phi",
    "self_exclusion",
]


@dataclass(frozen=True, slots=True)
class BlobParams:
    """Regularization radius; ``delta == 0`` is the singular kernel."""

    delta: float = 0.0

    def __post_init__(self) -> None:
        if not (np.isfinite(self.delta) and self.delta >= 0.0):
            raise ParameterError(f"delta must be finite and >= 0, got {self.delta}")


@dataclass(frozen=True, slots=True)
class TreeParams:
    """Barnes-Hut controls.

    ``order`` is the highest Taylor order kept about the center of charge:
    0 (or 1, since the dipole vanishes there) is monopole only, 2 adds the
    quadrupole term of the blob kernel.
    """

    theta: float = 0.5
    leaf_capacity: int = 16
    order: int = 2

    def __post_init__(self) -> None:
        if not (0.0 < self.theta <= 1.0):
            raise ParameterError(f"theta must lie in (0, 1], got {self.theta}")
        if self.leaf_capacity < 1:
            raise ParameterError("leaf_capacity must be a positive integer")
        if self.order not in (0, 1, 2):
            raise ParameterError("order must be 0, 1 or 2")


def singular_kernel(d: FloatArray) -> FloatArray:
    """d / |d|^2 for a single displacement or an (N, 2) batch."""
    d = np.asarray(d, dtype=np.float64)
    r2 = np.sum(d * d, axis=-1, keepdims=True)
    if np.any(r2 == 0.0):
        raise DomainError("singular kernel evaluated at zero displacement")
    return d / r2


def blob_kernel(d: FloatArray, b: BlobParams) -> FloatArray:
    """d / (|d|^2 + delta^2); equals 0 at d = 0 when delta > 0."""
    d = np.asarray(d, dtype=np.float64)
    r2 = np.sum(d * d, axis=-1, keepdims=True) + b.delta * b.delta
    if np.any(r2 == 0.0):
        raise DomainError("blob kernel with delta=0 evaluated at zero displacement")
    return d / r2


def self_exclusion(n: int) -> np.ndarray:
    """Exclusion map for the case targets == sources: skip j == i."""
    return np.arange(n, dtype=np.int64)


@numba.njit(parallel=True, cache=True)
def _direct_kernel(tx, ty, sx, sy, w, delta2, excl, ex_out, ey_out, bad):
    nt = tx.shape[0]
    ns = sx.shape[0]
    for i in numba.prange(nt):
        ex = 0.0
        ey = 0.0
        skip = excl[i]
        for j in range(ns):
            if j == skip:
                continue
            dx = tx[i] - sx[j]
            dy = ty[i] - sy[j]
            r2 = dx * dx + dy * dy + delta2
            if r2 == 0.0:
                bad[i] = j
                continue
            ex += w[j] * dx / r2
            ey += w[j] * dy / r2
        ex_out[i] = ex
        ey_out[i] = ey


def _exclusion_array(exclude, n_targets: int) -> np.ndarray:
    if exclude is None:
        return np.full(n_targets, -1, dtype=np.int64)
    excl = np.ascontiguousarray(np.asarray(exclude, dtype=np.int64)).reshape(-1)
    if excl.shape[0] != n_targets:
        raise DomainError("exclusion map length must match the number of targets")
    return excl


def direct_field(
    targets: FloatArray,
    sources: FloatArray,
    weights: FloatArray,
    b: BlobParams = BlobParams(),
    exclude: np.ndarray | None = None,
) -> FloatArray:
    """Field sum_j w_j K_delta(x_i - y_j) at every target by direct summation.

    Parameters
    ----------
    targets : (M, 2) evaluation points.
    sources : (N, 2) source positions.
    weights : (N,) non-negative source weights.
    b : blob regularization.
    exclude : optional (M,) int array; ``exclude[i]`` is a source index skipped
        for target i (-1 for none). Use :func:`self_exclusion` when the targets
        are the sources themselves.

    Returns
    -------
    (M, 2) field values.
    """
    tx = as_points(targets, "targets")
    sx = as_points(sources, "sources") if len(sources) else np.zeros((0, 2))
    w = as_weights(weights, sx.shape[0])
    excl = _exclusion_array(exclude, tx.shape[0])
    ex = np.empty(tx.shape[0])
    ey = np.empty(tx.shape[0])
    bad = np.full(tx.shape[0], -1, dtype=np.int64)
    _direct_kernel(
        np.ascontiguousarray(tx[:, 0]), np.ascontiguousarray(tx[:, 1]),
        np.ascontiguousarray(sx[:, 0]), np.ascontiguousarray(sx[:, 1]),
        w, b.delta * b.delta, excl, ex, ey, bad,
    )
    hit = np.flatnonzero(bad >= 0)
    if hit.size:
        i = int(hit[0])
        raise DomainError(
            f"target {i} coincides with source {int(bad[i])} and delta=0 without exclusion"
        )
    return np.stack((ex, ey), axis=1)


def tree_field(targets, sources, weights, b: BlobParams = BlobParams(),
               tp: TreeParams = TreeParams(), exclude=None) -> FloatArray:
    """Barnes-Hut approximation of :func:`direct_field`; see :mod:`gyrolimit.treecode`."""
    from .treecode import tree_field as _tree_field

    return _tree_field(targets, sources, weights, b, tp, exclude)


def h_phi(phi, x: FloatArray, y: FloatArray) -> float:
    """Symmetrized weak-form kernel
    0.5 * (x - y)^perp / |x - y|^2 . (grad phi(x) - grad phi(y)).

    ``phi`` is any object with a vectorized ``grad`` method.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = x - y
    r2 = float(d @ d)
    if r2 == 0.0:
        raise DomainError("h_phi is undefined on the diagonal x == y")
    g = phi.grad(np.stack((x, y)))
    return 0.5 * float(perp(d) @ (g[0] - g[1])) / r2
