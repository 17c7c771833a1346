"""Named analytic initial profiles: spatial density rho0, velocity shape F
(unit mass, supported in the unit disk) and mean velocity field u."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._vec import FloatArray, perp
from .errors import ParameterError


@dataclass(frozen=True, slots=True)
class PatchProfile:
    """A (1 - (r / R(phi))^2)^p on r < R(phi), R(phi) = R0 (1 + a cos(m phi)),
    with A chosen so the total mass is ``mass``. ``kind='square'`` is instead
    the indicator of [-R0/2, R0/2]^2 scaled to ``mass``."""

    kind: str = "perturbed_patch"
    radius: float = 1.0
    amplitude: float = 0.2
    mode: int = 3
    power: int = 3
    mass: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("perturbed_patch", "bump", "square"):
            raise ParameterError(f"unknown rho0 profile {self.kind!r}")
        if not (0 <= self.amplitude < 1):
            raise ParameterError("amplitude must lie in [0, 1)")

    @property
    def amp(self) -> float:
        return self.amplitude if self.kind == "perturbed_patch" else 0.0

    @property
    def peak(self) -> float:
        """||rho0||_inf."""
        if self.kind == "square":
            return self.mass / self.radius**2
        a = self.amp
        return self.mass * 2 * (self.power + 1) / (self.radius**2 * math.pi * (2 + a * a))

    @property
    def extent(self) -> float:
        """Half-width of a square containing the support."""
        if self.kind == "square":
            return 0.5 * self.radius
        return self.radius * (1 + self.amp)

    def __call__(self, x: FloatArray) -> FloatArray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.kind == "square":
            h = 0.5 * self.radius
            inside = (np.abs(x[:, 0]) < h) & (np.abs(x[:, 1]) < h)
            return np.where(inside, self.peak, 0.0)
        r = np.hypot(x[:, 0], x[:, 1])
        phi = np.arctan2(x[:, 1], x[:, 0])
        R = self.radius * (1 + self.amp * np.cos(self.mode * phi))
        s = np.where(r < R, 1.0 - (r / R) ** 2, 0.0)
        return self.peak * s**self.power


@dataclass(frozen=True, slots=True)
class VelocityShape:
    """Unit-mass shape F on the unit disk: 'uniform_disk' = 1/pi,
    'bump' = (3/pi)(1 - |xi|^2)^2."""

    kind: str = "bump"

    def __post_init__(self) -> None:
        if self.kind not in ("uniform_disk", "bump"):
            raise ParameterError(f"unknown velocity shape {self.kind!r}")

    @property
    def peak(self) -> float:
        return 1.0 / math.pi if self.kind == "uniform_disk" else 3.0 / math.pi

    @property
    def second_moment(self) -> float:
        """int |xi|^2 F(xi) dxi."""
        return 0.5 if self.kind == "uniform_disk" else 0.25

    def __call__(self, xi: FloatArray) -> FloatArray:
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        s = np.sum(xi * xi, axis=1)
        if self.kind == "uniform_disk":
            return np.where(s < 1.0, 1.0 / math.pi, 0.0)
        return np.where(s < 1.0, 3.0 / math.pi * (1.0 - s) ** 2, 0.0)


@dataclass(frozen=True, slots=True)
class MeanVelocity:
    """u(x): 'zero', 'constant' (u1, u2) or 'swirl' (strength * x^perp)."""

    kind: str = "zero"
    u1: float = 0.0
    u2: float = 0.0
    strength: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "constant", "swirl"):
            raise ParameterError(f"unknown mean velocity {self.kind!r}")

    def __call__(self, x: FloatArray) -> FloatArray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if self.kind == "constant":
            return np.tile([self.u1, self.u2], (x.shape[0], 1)).astype(np.float64)
        if self.kind == "swirl":
            return self.strength * perp(x)
        return np.zeros_like(x)


def monokinetic_finf(rho0: PatchProfile, F: VelocityShape, eta: float) -> float:
    """Analytic ||f0||_inf = ||rho0||_inf ||F||_inf / eta^2."""
    return rho0.peak * F.peak / eta**2
