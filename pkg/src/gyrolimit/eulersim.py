"""Vortex-blob solver for the limit equation d_t rho + E^perp . grad rho = 0:
each vortex moves with dz/dt = E^perp(z), RK4 in time."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._vec import FloatArray, perp
from .diagnostics import Frame, WeakResidualTracker, vortex_record
from .ensemble import VortexEnsemble
from .errors import InputError, NonFiniteState
from .fieldkernel import BlobParams, TreeParams, direct_field, self_exclusion
from .runtime import Trajectory, event_times, matches, segment_steps
from .testfunctions import TestFunction
from .treecode import tree_field

log = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Solver:
    kind: str = "direct"
    tree: TreeParams = TreeParams()


@dataclass(slots=True)
class EulerState:
    vortices: VortexEnsemble
    t: float = 0.0


def _field(z: FloatArray, w: FloatArray, b: BlobParams, solver: Solver) -> FloatArray:
    excl = self_exclusion(z.shape[0])
    if solver.kind == "tree":
        return tree_field(z, z, w, b, solver.tree, excl)
    return direct_field(z, z, w, b, excl)


def euler_velocity(z: FloatArray, w: FloatArray, b: BlobParams = BlobParams(),
                   solver: Solver = Solver()) -> FloatArray:
    """(sum_{j != i} w_j K_delta(z_i - z_j))^perp for every vortex i."""
    return perp(_field(np.asarray(z, dtype=np.float64), np.asarray(w, dtype=np.float64), b, solver))


def rk4_step(state: EulerState, dt: float, b: BlobParams = BlobParams(),
             solver: Solver = Solver()) -> EulerState:
    if not (np.isfinite(dt) and dt > 0):
        raise InputError(f"dt must be positive, got {dt}")
    z0 = state.vortices.z
    w = state.vortices.w
    k1 = euler_velocity(z0, w, b, solver)
    k2 = euler_velocity(z0 + 0.5 * dt * k1, w, b, solver)
    k3 = euler_velocity(z0 + 0.5 * dt * k2, w, b, solver)
    k4 = euler_velocity(z0 + dt * k3, w, b, solver)
    z1 = z0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.isfinite(z1).all():
        raise NonFiniteState(-1, state.t + dt, int((~np.isfinite(z1).all(axis=1)).sum()))
    return EulerState(VortexEnsemble(z1, w), state.t + dt)


def integrate_euler(
    vort: VortexEnsemble,
    dt: float,
    t_end: float,
    delta: float = 0.0,
    solver: Solver = Solver(),
    checkpoints=(),
    diag_interval: float | None = None,
    tests: list[TestFunction] | None = None,
    out_dir: Path | None = None,
) -> Trajectory:
    """RK4 from 0 to ``t_end`` with steps <= dt between event times."""
    from .io import snapshot_name, write_vortex_snapshot

    if not (np.isfinite(dt) and dt > 0):
        raise InputError(f"dt must be positive, got {dt}")
    b = BlobParams(delta)
    events = event_times(t_end, checkpoints, diag_interval)
    diag_times = events if diag_interval else [0.0, t_end]
    tracker = WeakResidualTracker(tests or [], delta)
    traj = Trajectory("euler", delta, dt)
    state = EulerState(vort.copy(), 0.0)
    wall = time.perf_counter()
    step_no = 0

    def frame(st: EulerState) -> None:
        if tracker.phis:
            z, w = st.vortices.z, st.vortices.w
            tracker.add(Frame(st.t, z, w, _field(z, w, b, solver)))

    def observe(st: EulerState) -> None:
        frame(st)
        if matches(st.t, diag_times):
            traj.records.append(vortex_record(st.vortices, st.t, delta, tracker.residuals()))
        if matches(st.t, checkpoints) or matches(st.t, (0.0, t_end)):
            snap = st.vortices.copy()
            traj.snapshots[st.t] = snap
            if tracker.phis:
                traj.wres_sup[st.t] = tracker.sup()
            if out_dir is not None:
                write_vortex_snapshot(Path(out_dir) / snapshot_name(st.t), snap.z, snap.w)

    observe(state)
    for a, c in zip(events[:-1], events[1:]):
        n, h = segment_steps(a, c, dt)
        for k in range(n):
            try:
                state = rk4_step(state, h, b, solver)
            except NonFiniteState as exc:
                raise NonFiniteState(step_no + 1, exc.t, exc.count) from None
            step_no += 1
            if k == n - 1:
                state.t = c
            else:
                frame(state)
        observe(state)
    traj.n_steps = step_no
    traj.wall_time = time.perf_counter() - wall
    log.info("euler: %d steps in %.1fs", step_no, traj.wall_time)
    return traj


def run_euler(config):
    """Run an ``euler`` RunConfig end to end; see :func:`gyrolimit.harness.execute_run`."""
    from .harness import execute_run

    return execute_run(config)
