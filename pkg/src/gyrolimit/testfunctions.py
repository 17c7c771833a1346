"""Smooth compactly supported test functions for weak pairings.

Each library function is a polynomial modulation p(y) of the bump
(1 - |y|^2)^4 with y = (x - c) / R, coded with exact gradient and Hessian.
"""

from __future__ import annotations

import functools
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ._vec import FloatArray
from .errors import ParameterError

_POLYS = ("1", "x1", "x2", "x1x2", "r2")


@dataclass(frozen=True)
class TestFunction:
    """Phi with vectorized value/grad/hess on (N, 2) points.

    ``w2inf_bound`` dominates sup|Phi|, sup|grad Phi| and sup ||D^2 Phi||_2.
    ``radius`` is the support radius about ``center`` (``inf`` for the
    non-compact helpers used in unit checks).
    """

    __test__ = False  # not a pytest class

    name: str
    value: Callable[[FloatArray], FloatArray]
    grad: Callable[[FloatArray], FloatArray]
    hess: Callable[[FloatArray], FloatArray]
    w2inf_bound: float
    center: tuple[float, float] = (0.0, 0.0)
    radius: float = np.inf

    def scaled(self, factor: float, name: str | None = None) -> TestFunction:
        return TestFunction(
            name or self.name,
            lambda x: factor * self.value(x),
            lambda x: factor * self.grad(x),
            lambda x: factor * self.hess(x),
            abs(factor) * self.w2inf_bound,
            self.center,
            self.radius,
        )

    def normalized(self) -> TestFunction:
        return self.scaled(1.0 / self.w2inf_bound)


def _bump_parts(x: FloatArray, c: FloatArray, R: float):
    y = (np.asarray(x, dtype=np.float64) - c) / R
    s = np.sum(y * y, axis=-1)
    inside = s < 1.0
    om = np.where(inside, 1.0 - s, 0.0)
    b = om**4
    gb = (-8.0 * om**3)[:, None] * y / R
    hb = ((-8.0 * om**3)[:, None, None] * np.eye(2)
          + (48.0 * om**2)[:, None, None] * y[:, :, None] * y[:, None, :]) / R**2
    return y, b, gb, hb


def _poly_parts(kind: str, y: FloatArray, R: float):
    n = y.shape[0]
    zero2 = np.zeros((n, 2))
    zero22 = np.zeros((n, 2, 2))
    if kind == "1":
        return np.ones(n), zero2, zero22
    if kind == "x1":
        g = zero2.copy()
        g[:, 0] = 1.0 / R
        return y[:, 0], g, zero22
    if kind == "x2":
        g = zero2.copy()
        g[:, 1] = 1.0 / R
        return y[:, 1], g, zero22
    if kind == "x1x2":
        g = np.stack((y[:, 1], y[:, 0]), axis=1) / R
        h = zero22.copy()
        h[:, 0, 1] = h[:, 1, 0] = 1.0 / R**2
        return y[:, 0] * y[:, 1], g, h
    if kind == "r2":
        h = np.broadcast_to(2.0 * np.eye(2) / R**2, (n, 2, 2)).copy()
        return np.sum(y * y, axis=1), 2.0 * y / R, h
    raise ParameterError(f"unknown polynomial modulation {kind!r}; choose from {_POLYS}")


def sampled_w2inf(value, grad, hess, center, radius, n: int = 401, margin: float = 1.02) -> float:
    """max(sup|Phi|, sup|grad|, sup||D^2||_2) on an n x n grid over the
    support square, inflated by ``margin``."""
    g = np.linspace(-radius, radius, n)
    X = np.stack(np.meshgrid(g + center[0], g + center[1], indexing="ij"), -1).reshape(-1, 2)
    v = np.abs(value(X)).max()
    d = np.linalg.norm(grad(X), axis=1).max()
    H = hess(X)
    a, b, c = H[:, 0, 0], 0.5 * (H[:, 0, 1] + H[:, 1, 0]), H[:, 1, 1]
    h = (np.abs(0.5 * (a + c)) + np.sqrt(0.25 * (a - c) ** 2 + b * b)).max()
    return margin * float(max(v, d, h))


def bump_test_function(center=(0.0, 0.0), radius: float = 1.0, poly: str = "1",
                       name: str | None = None) -> TestFunction:
    """p(y) (1 - |y|^2)^4 on |x - center| < radius, y = (x - center)/radius."""
    if not radius > 0:
        raise ParameterError("radius must be positive")
    c = np.asarray(center, dtype=np.float64)

    def parts(x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        y, b, gb, hb = _bump_parts(x, c, radius)
        p, gp, hp = _poly_parts(poly, y, radius)
        return p, gp, hp, b, gb, hb

    def value(x):
        p, _, _, b, _, _ = parts(x)
        return p * b

    def grad(x):
        p, gp, _, b, gb, _ = parts(x)
        return p[:, None] * gb + b[:, None] * gp

    def hess(x):
        p, gp, hp, b, gb, hb = parts(x)
        return (p[:, None, None] * hb + gp[:, :, None] * gb[:, None, :]
                + gb[:, :, None] * gp[:, None, :] + b[:, None, None] * hp)

    bound = sampled_w2inf(value, grad, hess, c, radius)
    label = name or f"b{c[0]:+.2f}{c[1]:+.2f}r{radius:g}_{poly}"
    return TestFunction(label, value, grad, hess, bound, (float(c[0]), float(c[1])), radius)


def linear_test_function(a=(1.0, 0.0), name: str = "linear") -> TestFunction:
    """Phi(x) = a . x (not compactly supported; for identity checks)."""
    a = np.asarray(a, dtype=np.float64)
    return TestFunction(
        name,
        lambda x: np.atleast_2d(x) @ a,
        lambda x: np.broadcast_to(a, np.atleast_2d(x).shape).copy(),
        lambda x: np.zeros((np.atleast_2d(x).shape[0], 2, 2)),
        float(np.linalg.norm(a)),
    )


def quadratic_test_function(name: str = "half_r2") -> TestFunction:
    """Phi(x) = |x|^2 / 2 (not compactly supported)."""
    return TestFunction(
        name,
        lambda x: 0.5 * np.sum(np.atleast_2d(x) ** 2, axis=1),
        lambda x: np.atleast_2d(np.asarray(x, dtype=np.float64)).copy(),
        lambda x: np.broadcast_to(np.eye(2), (np.atleast_2d(x).shape[0], 2, 2)).copy(),
        1.0,
    )


def product_test_function(name: str = "x1x2") -> TestFunction:
    """Phi(x) = x1 x2 (not compactly supported)."""
    def hess(x):
        h = np.zeros((np.atleast_2d(x).shape[0], 2, 2))
        h[:, 0, 1] = h[:, 1, 0] = 1.0
        return h

    return TestFunction(
        name,
        lambda x: np.atleast_2d(x)[:, 0] * np.atleast_2d(x)[:, 1],
        lambda x: np.atleast_2d(np.asarray(x, dtype=np.float64))[:, ::-1].copy(),
        hess,
        1.0,
    )


@functools.lru_cache(maxsize=8)
def _standard(scale: float) -> tuple[TestFunction, ...]:
    lib = [bump_test_function((0.0, 0.0), 1.5 * scale, p, name=f"c_{p}") for p in _POLYS]
    offsets = {"e": (0.6, 0.0), "w": (-0.6, 0.0), "n": (0.0, 0.6), "s": (0.0, -0.6)}
    for tag, (ox, oy) in offsets.items():
        for p in ("1", "x1", "x2"):
            lib.append(bump_test_function((ox * scale, oy * scale), 0.8 * scale, p, name=f"{tag}_{p}"))
    return tuple(phi.normalized() for phi in lib)


def standard_library(scale: float = 1.0) -> list[TestFunction]:
    """The fixed, normalized library used by sweeps (w2inf_bound == 1).

    Five modulations of a centered bump of radius 1.5*scale, plus plain and
    first-order modulated bumps of radius 0.8*scale centered at distance
    0.6*scale on both axes.
    """
    return list(_standard(float(scale)))


LIBRARIES = {"standard": standard_library}


def get_library(name: str, scale: float = 1.0) -> list[TestFunction]:
    try:
        return LIBRARIES[name](scale)
    except KeyError:
        raise ParameterError(f"unknown test-function set {name!r}; known: {sorted(LIBRARIES)}") from None
