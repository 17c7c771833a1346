"""Weighted phase-space particles and vortices, deterministic quadrature
initialization, cloud-in-cell deposition and admissibility of initial data."""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._vec import FloatArray, as_points, as_weights
from .errors import DomainError, InputError, ParameterError

Box = tuple[float, float, float, float]  # (xmin, xmax, ymin, ymax)


class PhaseParticle(NamedTuple):
    x: tuple[float, float]
    v: tuple[float, float]
    w: float


@dataclass(slots=True)
class ParticleEnsemble:
    """Empirical measure sum_i w_i delta_(x_i, v_i) for f_eps at one time."""

    x: FloatArray
    v: FloatArray
    w: FloatArray
    epsilon: float

    def __post_init__(self) -> None:
        self.x = as_points(self.x, "x") if len(self.x) else np.zeros((0, 2))
        self.v = as_points(self.v, "v") if len(self.v) else np.zeros((0, 2))
        if self.v.shape != self.x.shape:
            raise InputError("x and v must have the same shape")
        self.w = as_weights(self.w, self.x.shape[0])
        if not self.epsilon >= 0.0:
            raise ParameterError("epsilon must be >= 0")

    @classmethod
    def from_particles(cls, particles: Sequence[PhaseParticle], epsilon: float) -> ParticleEnsemble:
        x = np.array([p.x for p in particles], dtype=np.float64).reshape(-1, 2)
        v = np.array([p.v for p in particles], dtype=np.float64).reshape(-1, 2)
        w = np.array([p.w for p in particles], dtype=np.float64)
        return cls(x, v, w, epsilon)

    def particles(self) -> list[PhaseParticle]:
        return [PhaseParticle(tuple(a), tuple(b), float(c)) for a, b, c in zip(self.x, self.v, self.w)]

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.w.sum())

    def copy(self) -> ParticleEnsemble:
        return ParticleEnsemble(self.x.copy(), self.v.copy(), self.w.copy(), self.epsilon)


@dataclass(slots=True)
class VortexEnsemble:
    z: FloatArray
    w: FloatArray

    def __post_init__(self) -> None:
        self.z = as_points(self.z, "z") if len(self.z) else np.zeros((0, 2))
        self.w = as_weights(self.w, self.z.shape[0])

    @property
    def n(self) -> int:
        return self.z.shape[0]

    @property
    def total_mass(self) -> float:
        return float(self.w.sum())

    def copy(self) -> VortexEnsemble:
        return VortexEnsemble(self.z.copy(), self.w.copy())


@dataclass(frozen=True, slots=True)
class GridSpec:
    """Uniform grid; cell (i, j) has center origin + ((i + 1/2) h, (j + 1/2) h)."""

    origin: tuple[float, float]
    h: float
    nx: int
    ny: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.h) and self.h > 0):
            raise ParameterError(f"grid spacing h must be positive, got {self.h}")
        if self.nx < 1 or self.ny < 1:
            raise ParameterError("grid dimensions must be positive")

    @classmethod
    def covering(cls, box: Box, n: int) -> GridSpec:
        """Square cells, ``n`` along the longer side of ``box``."""
        xmin, xmax, ymin, ymax = box
        h = max(xmax - xmin, ymax - ymin) / n
        return cls((xmin, ymin), h, int(np.ceil((xmax - xmin) / h - 1e-9)),
                   int(np.ceil((ymax - ymin) / h - 1e-9)))

    def centers(self) -> tuple[FloatArray, FloatArray]:
        cx = self.origin[0] + (np.arange(self.nx) + 0.5) * self.h
        cy = self.origin[1] + (np.arange(self.ny) + 0.5) * self.h
        return cx, cy


@dataclass(slots=True)
class DensityGrid:
    spec: GridSpec
    values: FloatArray  # (nx, ny), density units (mass / area)
    clipped_mass: float = 0.0

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.spec.h**2)


@dataclass(slots=True)
class InitialDataSpec:
    """Analytic f0(x, v) sampled by midpoint quadrature on a 4D box grid.

    ``f0`` takes (M, 2) positions and (M, 2) velocities and returns (M,)
    values. ``finf`` is the analytic sup norm, if known.
    """

    f0: Callable[[FloatArray, FloatArray], FloatArray]
    x_box: Box
    v_box: Box
    mx: int
    mv: int
    finf: float | None = None


def _midpoints(box: Box, m: int) -> tuple[FloatArray, FloatArray, float]:
    xmin, xmax, ymin, ymax = box
    hx = (xmax - xmin) / m
    hy = (ymax - ymin) / m
    return xmin + (np.arange(m) + 0.5) * hx, ymin + (np.arange(m) + 0.5) * hy, hx * hy


def spatial_quadrature(rho0: Callable[[FloatArray], FloatArray], box: Box, m: int):
    """Midpoint cells of ``box`` with their masses rho0(c) * area; empty cells dropped.

    Returns ``(centers (K, 2), masses (K,), cell_area)``. Cells are ordered
    with the first coordinate outermost.
    """
    if m < 1:
        raise ParameterError("resolution must be >= 1")
    cx, cy, area = _midpoints(box, m)
    c = np.stack(np.meshgrid(cx, cy, indexing="ij"), axis=-1).reshape(-1, 2)
    r = np.asarray(rho0(c), dtype=np.float64)
    if (r < 0).any():
        k = int(np.flatnonzero(r < 0)[0])
        raise InputError(f"rho0 is negative ({r[k]:g}) at x={tuple(c[k])}")
    keep = r > 0
    return c[keep], r[keep] * area, area


def init_from_density(spec: InitialDataSpec, epsilon: float = 1.0) -> ParticleEnsemble:
    """One particle per phase cell with weight f0(midpoint) * dx * dv.

    Zero-weight particles are dropped. Raises InputError naming the first
    midpoint where f0 is negative.
    """
    if spec.mx < 1 or spec.mv < 1:
        raise ParameterError("phase-grid resolutions must be >= 1")
    ax, ay, dA = _midpoints(spec.x_box, spec.mx)
    bx, by, dV = _midpoints(spec.v_box, spec.mv)
    xs = np.stack(np.meshgrid(ax, ay, indexing="ij"), axis=-1).reshape(-1, 2)
    vs = np.stack(np.meshgrid(bx, by, indexing="ij"), axis=-1).reshape(-1, 2)
    nv = vs.shape[0]
    out_x, out_v, out_w = [], [], []
    for xc in xs:
        X = np.broadcast_to(xc, vs.shape)
        f = np.asarray(spec.f0(X, vs), dtype=np.float64).reshape(nv)
        if (f < 0).any():
            k = int(np.flatnonzero(f < 0)[0])
            raise InputError(f"f0 is negative ({f[k]:g}) at x={tuple(xc)}, v={tuple(vs[k])}")
        keep = f > 0
        if keep.any():
            out_x.append(X[keep])
            out_v.append(vs[keep])
            out_w.append(f[keep] * dA * dV)
    if not out_w:
        return ParticleEnsemble(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0), epsilon)
    return ParticleEnsemble(np.concatenate(out_x), np.concatenate(out_v),
                            np.concatenate(out_w), epsilon)


def monokinetic_family(
    rho0: Callable[[FloatArray], FloatArray],
    u: Callable[[FloatArray], FloatArray],
    F: Callable[[FloatArray], FloatArray],
    eta: float,
    x_box: Box,
    mx: int,
    mv: int,
    xi_box: Box = (-1.0, 1.0, -1.0, 1.0),
    epsilon: float = 1.0,
) -> ParticleEnsemble:
    """Quadrature of f0(x, v) = rho0(x) eta^-2 F((v - u(x)) / eta).

    Substituting v = u(x) + eta * xi, each spatial cell c carries the
    particles v = u(c) + eta * xi_k with weight rho0(c) dA * F(xi_k) dxi,
    where xi_k are the midpoints of ``xi_box`` (which must contain supp F).
    """
    if not eta > 0:
        raise ParameterError(f"eta must be > 0, got {eta}")
    centers, masses, _ = spatial_quadrature(rho0, x_box, mx)
    bx, by, dxi = _midpoints(xi_box, mv)
    xi = np.stack(np.meshgrid(bx, by, indexing="ij"), axis=-1).reshape(-1, 2)
    fw = np.asarray(F(xi), dtype=np.float64)
    if (fw < 0).any():
        raise InputError("F is negative on the velocity grid")
    keep = fw > 0
    xi, fw = xi[keep], fw[keep] * dxi
    uc = np.asarray(u(centers), dtype=np.float64).reshape(-1, 2)
    nk = xi.shape[0]
    x = np.repeat(centers, nk, axis=0)
    v = np.repeat(uc, nk, axis=0) + eta * np.tile(xi, (centers.shape[0], 1))
    w = np.repeat(masses, nk) * np.tile(fw, centers.shape[0])
    return ParticleEnsemble(x, v, w, epsilon)


def matched_vortices(rho0, F, x_box: Box, mx: int, mv: int,
                     xi_box: Box = (-1.0, 1.0, -1.0, 1.0)) -> VortexEnsemble:
    """Vortices at the spatial cells of :func:`monokinetic_family`, each
    carrying the cell's total phase mass."""
    centers, masses, _ = spatial_quadrature(rho0, x_box, mx)
    bx, by, dxi = _midpoints(xi_box, mv)
    xi = np.stack(np.meshgrid(bx, by, indexing="ij"), axis=-1).reshape(-1, 2)
    fw = np.asarray(F(xi), dtype=np.float64)
    fw = fw[fw > 0] * dxi
    w = np.array([np.sum(m * fw) for m in masses])
    return VortexEnsemble(centers, w)


def deposit_density(points: FloatArray, weights: FloatArray, grid: GridSpec) -> DensityGrid:
    """Cloud-in-cell (bilinear) deposition, divided by h^2.

    Mass whose stencil falls outside the grid is accumulated in
    ``clipped_mass`` rather than dropped silently.
    """
    pts = as_points(points) if len(points) else np.zeros((0, 2))
    w = as_weights(weights, pts.shape[0])
    h = grid.h
    s = (pts - np.asarray(grid.origin)) / h - 0.5
    i0 = np.floor(s).astype(np.int64)
    f = s - i0
    values = np.zeros((grid.nx, grid.ny))
    clipped = 0.0
    for di in (0, 1):
        for dj in (0, 1):
            ii = i0[:, 0] + di
            jj = i0[:, 1] + dj
            frac = (f[:, 0] if di else 1.0 - f[:, 0]) * (f[:, 1] if dj else 1.0 - f[:, 1])
            m = w * frac
            inside = (ii >= 0) & (ii < grid.nx) & (jj >= 0) & (jj < grid.ny)
            np.add.at(values, (ii[inside], jj[inside]), m[inside])
            clipped += float(m[~inside].sum())
    return DensityGrid(grid, values / (h * h), clipped)


def theta_fn(tau: float | FloatArray) -> float | FloatArray:
    """tau * ln(tau + 2), defined for tau >= 0."""
    t = np.asarray(tau, dtype=np.float64)
    if (t < 0).any():
        raise DomainError("theta_fn requires tau >= 0")
    out = t * np.log(t + 2.0)
    return float(out) if out.ndim == 0 else out


@dataclass(slots=True)
class AdmissibilityReport:
    eps: list[float]
    finf: list[float]
    eps2_theta: list[float]
    decreasing: bool
    admissible: bool
    uniform_bound: bool
    notes: list[str] = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["eps,finf,eps2_theta"]
        lines += [f"{e:.17g},{f:.17g},{v:.17g}" for e, f, v in zip(self.eps, self.finf, self.eps2_theta)]
        lines.append(f"# decreasing={self.decreasing} admissible={self.admissible} "
                     f"uniform_bound={self.uniform_bound}")
        return "\n".join(lines) + "\n"


def admissibility_report(eps: Sequence[float], finf: Sequence[float]) -> AdmissibilityReport:
    """Evaluate eps^2 Theta(||f0||_inf) along a decreasing eps sequence.

    ``admissible`` means the values strictly decrease and fall faster than
    the sequence itself would allow a positive limit (log-log slope > 0).
    ``uniform_bound`` means ||f0||_inf does not grow as eps decreases.
    """
    e = np.asarray(eps, dtype=np.float64)
    f = np.asarray(finf, dtype=np.float64)
    notes: list[str] = []
    if e.shape != f.shape:
        raise InputError("eps and finf must have the same length")
    if e.size >= 2 and not np.all(np.diff(e) < 0):
        notes.append("eps is not strictly decreasing")
    vals = e**2 * theta_fn(f)
    vals = np.atleast_1d(vals)
    decreasing = bool(e.size >= 2 and np.all(np.diff(vals) < 0))
    admissible = decreasing
    if decreasing and e.size >= 2:
        slope = np.polyfit(np.log(e), np.log(vals), 1)[0]
        admissible = bool(slope > 0)
        notes.append(f"log-log slope of eps^2 Theta vs eps: {slope:.4g}")
    uniform = bool(e.size >= 1 and np.all(np.diff(f) <= 1e-12 * np.abs(f[:-1])))
    return AdmissibilityReport(e.tolist(), f.tolist(), vals.tolist(), decreasing,
                               admissible, uniform, notes)
