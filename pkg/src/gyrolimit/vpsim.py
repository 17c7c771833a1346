"""Characteristics of the scaled magnetized Vlasov-Poisson system

    dX/dt = V / eps,    dV/dt = (V^perp + eps E(X)) / eps^2,

advanced by Strang splitting: half kick, exact rotation-drift, half kick.
The rotation-drift flow (E = 0) is solved in closed form and keeps the
guiding center X + eps V^perp and the speed |V| fixed.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np

from ._vec import FloatArray, perp, rotate
from .diagnostics import Frame, WeakResidualTracker, record_for
from .ensemble import ParticleEnsemble
from .errors import InputError, NonFiniteState, StepRefused
from .fieldkernel import BlobParams, TreeParams, direct_field, self_exclusion
from .runtime import Trajectory, event_times, matches, segment_steps
from .testfunctions import TestFunction
from .treecode import tree_field

log = logging.getLogger(__name__)

DEFAULT_STEPS_PER_GYROPERIOD = 32
MIN_STEPS_PER_GYROPERIOD = 8


def gyroperiod(epsilon: float) -> float:
    return 2.0 * math.pi * epsilon**2


def default_dt(epsilon: float, steps_per_gyroperiod: int = DEFAULT_STEPS_PER_GYROPERIOD) -> float:
    return gyroperiod(epsilon) / steps_per_gyroperiod


@dataclass(slots=True)
class VPState:
    ensemble: ParticleEnsemble
    t: float = 0.0

    def copy(self) -> VPState:
        return VPState(self.ensemble.copy(), self.t)


@dataclass(frozen=True, slots=True)
class VPStepParams:
    """Step size and field mode.

    ``mode='self'`` uses the self-consistent blob field of the particles,
    ``mode='external'`` the constant field ``E0``.
    """

    dt: float
    mode: Literal["self", "external"] = "self"
    delta: float = 0.0
    solver: Literal["direct", "tree"] = "direct"
    tree: TreeParams = field(default_factory=TreeParams)
    E0: tuple[float, float] = (0.0, 0.0)
    min_steps_per_gyroperiod: int = MIN_STEPS_PER_GYROPERIOD

    def check(self, epsilon: float) -> None:
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise InputError(f"dt must be positive, got {self.dt}")
        if self.mode == "self":
            limit = gyroperiod(epsilon) / self.min_steps_per_gyroperiod
            if self.dt > limit * (1 + 1e-12):
                raise StepRefused(self.dt, default_dt(epsilon))


def compute_field(x: FloatArray, w: FloatArray, params: VPStepParams) -> FloatArray:
    """Field acting on each particle (self-interaction excluded)."""
    if params.mode == "external":
        return np.tile(np.asarray(params.E0, dtype=np.float64), (x.shape[0], 1))
    b = BlobParams(params.delta)
    excl = self_exclusion(x.shape[0])
    if params.solver == "tree":
        return tree_field(x, x, w, b, params.tree, excl)
    return direct_field(x, x, w, b, excl)


def _check_finite(x: FloatArray, v: FloatArray, t: float) -> None:
    ok = np.isfinite(x).all(axis=1) & np.isfinite(v).all(axis=1)
    if not ok.all():
        raise NonFiniteState(-1, t, int((~ok).sum()))


def rotation_drift_substep(state: VPState, dt: float) -> VPState:
    """Exact flow of dX = V/eps, dV = V^perp/eps^2 over ``dt``.

    V is rotated counterclockwise by dt/eps^2 and X moves so that
    X + eps V^perp is unchanged.
    """
    ens = state.ensemble
    eps = ens.epsilon
    v_new = rotate(ens.v, dt / eps**2)
    x_new = ens.x + eps * (perp(ens.v) - perp(v_new))
    _check_finite(x_new, v_new, state.t + dt)
    return VPState(ParticleEnsemble(x_new, v_new, ens.w, eps), state.t + dt)


def kick_substep(state: VPState, dt: float, fields: FloatArray) -> VPState:
    """V += (dt / eps) E(X); positions and time unchanged."""
    ens = state.ensemble
    if fields.shape != ens.v.shape:
        raise InputError(f"field array shape {fields.shape} does not match {ens.v.shape}")
    v_new = ens.v + (dt / ens.epsilon) * fields
    _check_finite(ens.x, v_new, state.t)
    return VPState(ParticleEnsemble(ens.x, v_new, ens.w, ens.epsilon), state.t)


class VPIntegrator:
    """Strang stepper that reuses the end-of-step field for the next step's
    first half kick, so the field is solved once per step."""

    def __init__(self, params: VPStepParams) -> None:
        self.params = params
        self._field: FloatArray | None = None
        self._field_x: FloatArray | None = None

    def field_at(self, state: VPState) -> FloatArray:
        x = state.ensemble.x
        if self._field is None or self._field_x is not x:
            self._field = compute_field(x, state.ensemble.w, self.params)
            self._field_x = x
        return self._field

    def step(self, state: VPState, dt: float | None = None) -> VPState:
        p = self.params if dt is None else replace(self.params, dt=dt)
        p.check(state.ensemble.epsilon)
        h = p.dt
        E = self.field_at(state)
        s = kick_substep(state, 0.5 * h, E)
        s = rotation_drift_substep(s, h)
        E_new = compute_field(s.ensemble.x, s.ensemble.w, self.params)
        self._field, self._field_x = E_new, s.ensemble.x
        return kick_substep(s, 0.5 * h, E_new)


def strang_step(state: VPState, params: VPStepParams) -> VPState:
    """One half-kick / rotation-drift / half-kick step of size params.dt."""
    return VPIntegrator(params).step(state)


def integrate_vp(
    ens: ParticleEnsemble,
    params: VPStepParams,
    t_end: float,
    checkpoints=(),
    diag_interval: float | None = None,
    tests: list[TestFunction] | None = None,
    out_dir: Path | None = None,
    on_snapshot=None,
) -> Trajectory:
    """Integrate from t = 0 to ``t_end``.

    Steps are uniform inside each interval between event times (checkpoints
    and diagnostic times), with size <= params.dt. Weak-form residuals for
    ``tests`` are accumulated at every step (self-consistent mode only).
    """
    from .io import snapshot_name, write_phase_snapshot

    params.check(ens.epsilon)
    events = event_times(t_end, checkpoints, diag_interval)
    diag_times = events if diag_interval else [0.0, t_end]
    tracker = WeakResidualTracker(tests or [], params.delta) if params.mode == "self" else None
    traj = Trajectory("vp", params.delta, params.dt, ens.epsilon)
    integ = VPIntegrator(params)
    state = VPState(ens.copy(), 0.0)
    wall = time.perf_counter()
    step_no = 0

    def observe(st: VPState) -> None:
        if tracker is not None and tracker.phis:
            tracker.add(Frame(st.t, st.ensemble.x, st.ensemble.w, integ.field_at(st)))
        if matches(st.t, diag_times):
            traj.records.append(record_for(st.ensemble, st.t, params.delta,
                                           tracker.residuals() if tracker else {}))
        if matches(st.t, checkpoints) or matches(st.t, (0.0, t_end)):
            snap = st.ensemble.copy()
            traj.snapshots[st.t] = snap
            if tracker is not None and tracker.phis:
                traj.wres_sup[st.t] = tracker.sup()
            if out_dir is not None:
                write_phase_snapshot(Path(out_dir) / snapshot_name(st.t), snap)
            if on_snapshot is not None:
                on_snapshot(st.t, snap)

    observe(state)
    for a, b in zip(events[:-1], events[1:]):
        n, h = segment_steps(a, b, params.dt)
        for k in range(n):
            try:
                state = integ.step(state, h)
            except NonFiniteState as exc:
                raise NonFiniteState(step_no + 1, exc.t, exc.count) from None
            step_no += 1
            if k == n - 1:
                state.t = b
            if tracker is not None and tracker.phis and k < n - 1:
                tracker.add(Frame(state.t, state.ensemble.x, state.ensemble.w, integ.field_at(state)))
        observe(state)
    traj.n_steps = step_no
    traj.wall_time = time.perf_counter() - wall
    log.info("vp eps=%g: %d steps in %.1fs", ens.epsilon, step_no, traj.wall_time)
    return traj


def run_vp(config):
    """Run a ``vp`` or ``external-field-test`` RunConfig end to end; see
    :func:`gyrolimit.harness.execute_run`."""
    from .harness import execute_run

    return execute_run(config)
