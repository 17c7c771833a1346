"""Discrete functionals and weak-form checks on particle snapshots.

All pairings use the particle empirical measure directly (no grid). Pairwise
sums run in numba with a fixed (i outer, j inner ascending) order and
per-row partials reduced sequentially, so results do not depend on the
thread count.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numba
import numpy as np

from ._vec import FloatArray, as_points, as_weights, perp
from .ensemble import ParticleEnsemble, VortexEnsemble
from .errors import DomainError, InputError, ParameterError
from .fieldkernel import BlobParams, direct_field, self_exclusion
from .testfunctions import TestFunction

__all__ = [
    "DiagnosticRecord",
    "SweepRow",
    "energy",
    "interaction_energy",
    "modified_moment",
    "kinetic_and_moments",
    "symmetrization_value",
    "pair_h_phi",
    "pair_unsymmetrized",
    "Frame",
    "WeakResidualTracker",
    "weak_residual",
    "dual_distance",
    "pairing",
    "record_for",
    "RECORD_COLUMNS",
]

RECORD_COLUMNS = ("t", "energy", "kinetic", "modified_moment", "second_moment", "J1", "symmetrization")


@dataclass(slots=True)
class DiagnosticRecord:
    t: float
    energy: float
    kinetic: float
    modified_moment: float
    second_moment: float
    J1: float
    symmetrization: float
    wres: dict[str, float] = field(default_factory=dict)

    def row(self) -> list[float]:
        return [getattr(self, c) for c in RECORD_COLUMNS] + list(self.wres.values())


@dataclass(slots=True)
class SweepRow:
    epsilon: float
    t: float
    dist_rho: float
    dist_gyro: float
    weak_residual: float
    status: str = "ok"
    weak_residual_sup: float = float("nan")


# ---------------------------------------------------------------- kernels


@numba.njit(parallel=True, cache=True)
def _log_pairs(x, y, w, delta2, rows, bad):
    n = x.shape[0]
    for i in numba.prange(n):
        acc = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            r2 = dx * dx + dy * dy + delta2
            if r2 == 0.0:
                bad[i] = j
                continue
            acc += w[j] * 0.5 * np.log(r2)
        rows[i] = w[i] * acc


@numba.njit(parallel=True, cache=True)
def _sym_pairs(x, y, w, delta2, rows, absrows, bad):
    n = x.shape[0]
    for i in numba.prange(n):
        acc = 0.0
        aacc = 0.0
        pxi = -y[i]
        pyi = x[i]
        for j in range(n):
            if j == i:
                continue
            dx = x[i] - x[j]
            dy = y[i] - y[j]
            r2 = dx * dx + dy * dy + delta2
            if r2 == 0.0:
                bad[i] = j
                continue
            s = w[i] * w[j] * (dx * pxi + dy * pyi) / r2
            acc += s
            aacc += abs(s)
        rows[i] = acc
        absrows[i] = aacc


@numba.njit(parallel=True, cache=True)
def _h_pairs(ax, ay, aw, agx, agy, bx, by, bw, bgx, bgy, delta2, same, rows, skipped):
    na = ax.shape[0]
    nb = bx.shape[0]
    for i in numba.prange(na):
        acc = 0.0
        nskip = 0
        for j in range(nb):
            if same and j == i:
                continue
            dx = ax[i] - bx[j]
            dy = ay[i] - by[j]
            r2 = dx * dx + dy * dy
            if r2 == 0.0:
                nskip += 1
                continue
            # (d^perp . g) with d^perp = (-dy, dx)
            gx = agx[i] - bgx[j]
            gy = agy[i] - bgy[j]
            acc += bw[j] * 0.5 * (-dy * gx + dx * gy) / (r2 + delta2)
        rows[i] = aw[i] * acc
        skipped[i] = nskip


def _xy(points: FloatArray) -> tuple[np.ndarray, np.ndarray]:
    return np.ascontiguousarray(points[:, 0]), np.ascontiguousarray(points[:, 1])


def _ordered_sum(rows: np.ndarray) -> float:
    return float(np.sum(rows))


# ---------------------------------------------------------------- functionals


def interaction_energy(points: FloatArray, weights: FloatArray, delta: float = 0.0) -> float:
    """-1/2 sum_{i != j} w_i w_j ln|x_i - x_j| (with |d|^2 -> |d|^2 + delta^2)."""
    x = as_points(points) if len(points) else np.zeros((0, 2))
    w = as_weights(weights, x.shape[0])
    rows = np.zeros(x.shape[0])
    bad = np.full(x.shape[0], -1, dtype=np.int64)
    _log_pairs(*_xy(x), w, delta * delta, rows, bad)
    hit = np.flatnonzero(bad >= 0)
    if hit.size:
        i = int(hit[0])
        raise DomainError(f"coincident points {i} and {int(bad[i])}: log energy is -inf")
    return -0.5 * _ordered_sum(rows)


def energy(ens: ParticleEnsemble | VortexEnsemble, delta: float = 0.0) -> float:
    """Discrete H = 1/2 sum w|v|^2 - 1/2 sum_{i != j} w_i w_j ln|x_i - x_j|.

    Vortex ensembles have no kinetic term. ``delta > 0`` uses the blob
    potential 1/2 ln(|d|^2 + delta^2), the energy conserved by blob dynamics.
    """
    if isinstance(ens, VortexEnsemble):
        return interaction_energy(ens.z, ens.w, delta)
    kin = 0.5 * float(ens.w @ np.sum(ens.v * ens.v, axis=1))
    return kin + interaction_energy(ens.x, ens.w, delta)


def modified_moment(ens: ParticleEnsemble) -> float:
    """sum_i w_i (|x_i + eps v_i^perp|^2 - eps^2 |v_i|^2)."""
    z = ens.x + ens.epsilon * perp(ens.v)
    return float(ens.w @ (np.sum(z * z, axis=1) - ens.epsilon**2 * np.sum(ens.v * ens.v, axis=1)))


def kinetic_and_moments(ens: ParticleEnsemble) -> tuple[float, float, float]:
    """(sum w|v|^2, sum w|x|^2, sum w|v|)."""
    v2 = np.sum(ens.v * ens.v, axis=1)
    return (float(ens.w @ v2), float(ens.w @ np.sum(ens.x * ens.x, axis=1)),
            float(ens.w @ np.sqrt(v2)))


def symmetrization_value(points: FloatArray, weights: FloatArray,
                         return_abs: bool = False, delta: float = 0.0) -> float | tuple[float, float]:
    """sum_{i != j} w_i w_j K(x_i - x_j) . x_i^perp, which vanishes exactly in
    exact arithmetic; the returned value is the floating-point residue.

    With ``return_abs`` also returns sum of |summands| for scaling. ``delta > 0``
    uses the blob kernel, for which coincident points are allowed.
    """
    x = as_points(points) if len(points) else np.zeros((0, 2))
    w = as_weights(weights, x.shape[0])
    rows = np.zeros(x.shape[0])
    absrows = np.zeros(x.shape[0])
    bad = np.full(x.shape[0], -1, dtype=np.int64)
    _sym_pairs(*_xy(x), w, delta * delta, rows, absrows, bad)
    hit = np.flatnonzero(bad >= 0)
    if hit.size:
        i = int(hit[0])
        raise DomainError(f"coincident points {i} and {int(bad[i])}")
    val = _ordered_sum(rows)
    return (val, _ordered_sum(absrows)) if return_abs else val


def pair_h_phi(a_points: FloatArray, a_weights: FloatArray, b_points: FloatArray | None,
               b_weights: FloatArray | None, phi: TestFunction, delta: float = 0.0,
               with_skipped: bool = False):
    """sum_{i,j} wa_i wb_j H_phi(x_i, y_j), skipping coincident pairs.

    Pass ``b_points=None`` to pair a density with itself (self-pairs i == j
    skipped). ``delta > 0`` replaces 1/|d|^2 with 1/(|d|^2 + delta^2), the
    pairing matching blob dynamics. With ``with_skipped`` returns
    ``(value, number of skipped coincident cross-pairs)``.
    """
    a = as_points(a_points) if len(a_points) else np.zeros((0, 2))
    aw = as_weights(a_weights, a.shape[0])
    same = b_points is None
    if same:
        b, bw = a, aw
    else:
        b = as_points(b_points) if len(b_points) else np.zeros((0, 2))
        bw = as_weights(b_weights, b.shape[0])
    ga = phi.grad(a) if a.shape[0] else np.zeros((0, 2))
    gb = ga if same else (phi.grad(b) if b.shape[0] else np.zeros((0, 2)))
    rows = np.zeros(a.shape[0])
    skipped = np.zeros(a.shape[0], dtype=np.int64)
    _h_pairs(*_xy(a), aw, *_xy(np.ascontiguousarray(ga)), *_xy(b), bw,
             *_xy(np.ascontiguousarray(gb)), delta * delta, same, rows, skipped)
    val = _ordered_sum(rows)
    if with_skipped:
        return val, int(skipped.sum())
    return val


def pair_unsymmetrized(points: FloatArray, weights: FloatArray, phi: TestFunction,
                       delta: float = 0.0, field: FloatArray | None = None) -> float:
    """sum_i w_i E^perp(x_i) . grad phi(x_i), E the (self-excluded) field of
    the same points. Equal to pair_h_phi(A, A) by symmetrization."""
    x = as_points(points)
    w = as_weights(weights, x.shape[0])
    if field is None:
        field = direct_field(x, x, w, BlobParams(delta), self_exclusion(x.shape[0]))
    g = phi.grad(x)
    return float(w @ np.sum(perp(field) * g, axis=1))


def pairing(points: FloatArray, weights: FloatArray, phi: TestFunction) -> float:
    """<rho, phi> for the empirical measure."""
    if len(points) == 0:
        return 0.0
    return float(np.asarray(weights) @ phi.value(np.asarray(points)))


# ---------------------------------------------------------------- weak form


@dataclass(slots=True)
class Frame:
    """Spatial marginal at time t, optionally with its (self-excluded) field."""

    t: float
    points: FloatArray
    weights: FloatArray
    field: FloatArray | None = None


class WeakResidualTracker:
    """Online trapezoid accumulation of the weak-form residual

        <rho(t), phi> - <rho(0), phi> - int_0^t pair_h_phi(rho(s), rho(s), phi) ds

    for time-independent test functions. Frames carrying a field use the
    unsymmetrized identity sum_i w_i E^perp(x_i) . grad phi(x_i), which costs
    O(N) per test function; frames without one use :func:`pair_h_phi`.
    """

    def __init__(self, phis: Sequence[TestFunction], delta: float = 0.0) -> None:
        self.phis = list(phis)
        self.delta = delta
        self.t0: float | None = None
        self.t: float | None = None
        self._p0 = np.zeros(len(self.phis))
        self._p = np.zeros(len(self.phis))
        self._g = np.zeros(len(self.phis))
        self._integral = np.zeros(len(self.phis))
        self._sup = np.zeros(len(self.phis))

    def _integrand(self, frame: Frame) -> np.ndarray:
        if frame.field is not None:
            return np.array([pair_unsymmetrized(frame.points, frame.weights, phi, field=frame.field)
                             for phi in self.phis])
        return np.array([pair_h_phi(frame.points, frame.weights, None, None, phi, self.delta)
                         for phi in self.phis])

    def add(self, frame: Frame) -> None:
        g = self._integrand(frame)
        p = np.array([pairing(frame.points, frame.weights, phi) for phi in self.phis])
        if self.t is None:
            self.t0 = frame.t
            self._p0 = p
        else:
            if frame.t < self.t:
                raise InputError("frames must be added in non-decreasing time order")
            self._integral += 0.5 * (frame.t - self.t) * (g + self._g)
        self.t = frame.t
        self._p = p
        self._g = g
        self._sup = np.maximum(self._sup, np.abs(self._p - self._p0 - self._integral))

    def residuals(self) -> dict[str, float]:
        r = self._p - self._p0 - self._integral
        return {phi.name: float(v) for phi, v in zip(self.phis, r)}

    def sup(self) -> float:
        """max over test functions and over all frames so far of |residual|."""
        return float(self._sup.max()) if self.phis else 0.0


def weak_residual(frames: Iterable[Frame], phi: TestFunction, t: float, delta: float = 0.0) -> float:
    """Weak-form residual at time ``t`` by trapezoid quadrature on the frame
    times. ``t`` must coincide with a frame time (relative tolerance 1e-12)."""
    frames = sorted(frames, key=lambda f: f.t)
    if not frames:
        raise InputError("empty trajectory")
    if t > frames[-1].t * (1 + 1e-12) + 1e-300 or t < frames[0].t:
        raise InputError(f"t={t} outside the trajectory [{frames[0].t}, {frames[-1].t}]")
    tracker = WeakResidualTracker([phi], delta)
    for fr in frames:
        if fr.t > t + 1e-12 * max(1.0, abs(t)):
            raise InputError(f"t={t} is not a frame time")
        tracker.add(fr)
        if abs(fr.t - t) <= 1e-12 * max(1.0, abs(t)):
            return tracker.residuals()[phi.name]
    raise InputError(f"t={t} is not a frame time")


def dual_distance(a: tuple[FloatArray, FloatArray], b: tuple[FloatArray, FloatArray],
                  tests: Sequence[TestFunction]) -> float:
    """max over the test set of |<A, phi> - <B, phi>|.

    A pseudometric, bounded above by the W^{-2,1} distance when every test
    function has ``w2inf_bound <= 1``.
    """
    if not tests:
        raise ParameterError("dual_distance needs a non-empty test set")
    for phi in tests:
        if phi.w2inf_bound > 1.0 + 1e-12:
            raise ParameterError(f"test function {phi.name} is not normalized (bound {phi.w2inf_bound:g})")
    return max(abs(pairing(*a, phi) - pairing(*b, phi)) for phi in tests)


def record_for(ens: ParticleEnsemble, t: float, delta: float = 0.0,
               wres: dict[str, float] | None = None) -> DiagnosticRecord:
    """Full diagnostic record of a phase ensemble at time t."""
    K, m2, J1 = kinetic_and_moments(ens)
    return DiagnosticRecord(
        t=t,
        energy=energy(ens, delta),
        kinetic=K,
        modified_moment=modified_moment(ens),
        second_moment=m2,
        J1=J1,
        symmetrization=symmetrization_value(ens.x, ens.w, delta=delta) if ens.n else 0.0,
        wres=dict(wres or {}),
    )


def vortex_record(vort: VortexEnsemble, t: float, delta: float = 0.0,
                  wres: dict[str, float] | None = None) -> DiagnosticRecord:
    """Record for vortices: no kinetic terms; modified moment is sum w|z|^2."""
    m2 = float(vort.w @ np.sum(vort.z * vort.z, axis=1))
    return DiagnosticRecord(
        t=t, energy=energy(vort, delta), kinetic=0.0, modified_moment=m2, second_moment=m2,
        J1=0.0, symmetrization=symmetrization_value(vort.z, vort.w, delta=delta) if vort.n else 0.0,
        wres=dict(wres or {}),
    )
