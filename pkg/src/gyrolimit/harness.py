"""Run orchestration, the epsilon sweep and log-log rate fitting."""

from __future__ import annotations

import logging
import math
import os
import subprocess
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import __version__
from .config import RunConfig, SweepSpec, serialize
from .diagnostics import SweepRow, dual_distance
from .ensemble import ParticleEnsemble, VortexEnsemble, matched_vortices, monokinetic_family
from .errors import ParameterError
from .eulersim import Solver, integrate_euler
from .fieldkernel import TreeParams
from .gyro import z_transform
from .io import write_diagnostics, write_meta
from .profiles import monokinetic_finf
from .runtime import Trajectory
from .testfunctions import get_library
from .vpsim import VPStepParams, default_dt, integrate_vp

log = logging.getLogger(__name__)


def set_threads(n: int) -> int:
    """Apply the thread count; ``GYROLIMIT_THREADS`` overrides ``n``."""
    import numba

    env = os.environ.get("GYROLIMIT_THREADS")
    if env:
        n = int(env)
    n = max(1, min(n, numba.config.NUMBA_NUM_THREADS))
    numba.set_num_threads(n)
    return n


def code_version() -> str:
    try:
        rev = subprocess.run(["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True,
                             cwd=Path(__file__).parent, timeout=5).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return f"{__version__}+{rev}" if rev else __version__


def auto_delta(points: np.ndarray) -> float:
    """0.5 * mean nearest-neighbour spacing of the distinct initial positions."""
    pts = np.unique(points, axis=0)
    if pts.shape[0] < 2:
        return 0.0
    d, _ = cKDTree(pts).query(pts, k=2)
    return 0.5 * float(d[:, 1].mean())


def _solver(cfg) -> tuple[str, TreeParams]:
    f = cfg.field
    return f.solver, TreeParams(f.theta, f.leaf_capacity, f.tree_order)


def initial_ensemble(cfg: RunConfig | SweepSpec, epsilon: float, eta: float) -> ParticleEnsemble:
    ini = cfg.initial
    return monokinetic_family(ini.rho0_profile(), ini.mean_velocity(), ini.velocity_shape(), eta,
                              ini.x_box(), ini.mx, ini.mv, epsilon=epsilon)


def initial_vortices(cfg: RunConfig | SweepSpec) -> VortexEnsemble:
    ini = cfg.initial
    return matched_vortices(ini.rho0_profile(), ini.velocity_shape(), ini.x_box(), ini.mx, ini.mv)


def resolve_delta(cfg, points: np.ndarray) -> float:
    return cfg.field.delta if cfg.field.delta is not None else auto_delta(points)


def _meta(cfg, out: Path, extra: dict) -> None:
    entries = {"code_version": code_version(), **extra}
    write_meta(out / "meta.txt", entries, serialize(cfg))


def execute_run(cfg: RunConfig, out_dir: Path | None = None, figures: bool = True) -> Trajectory:
    """Run a single vp / external-field-test / euler configuration and write
    snapshots, diagnostics.csv, meta.txt and figures to the output directory."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    threads = set_threads(cfg.threads)
    tests = get_library(cfg.test_set, cfg.test_scale)
    kind, tree = _solver(cfg)
    if cfg.mode == "euler":
        vort = initial_vortices(cfg)
        delta = resolve_delta(cfg, vort.z)
        meta = {"kind": "euler", "delta": repr(delta), "dt": repr(cfg.euler_dt),
                "threads": threads, "n": vort.n}
        _meta(cfg, out, meta)
        traj = integrate_euler(vort, cfg.euler_dt, cfg.t_end, delta, Solver(kind, tree),
                               cfg.checkpoints, cfg.diag_interval, tests, out)
    else:
        ens = initial_ensemble(cfg, cfg.epsilon, cfg.initial.eta)
        delta = resolve_delta(cfg, ens.x)
        dt = cfg.dt if cfg.dt is not None else default_dt(cfg.epsilon, cfg.steps_per_gyroperiod)
        mode = "external" if cfg.mode == "external-field-test" else "self"
        params = VPStepParams(dt=dt, mode=mode, delta=delta, solver=kind, tree=tree,
                              E0=tuple(cfg.field.external_E))
        finf = monokinetic_finf(cfg.initial.rho0_profile(), cfg.initial.velocity_shape(), cfg.initial.eta)
        meta = {"kind": "vp", "mode": cfg.mode, "epsilon": repr(cfg.epsilon), "delta": repr(delta),
                "dt": repr(dt), "threads": threads, "n": ens.n, "finf": repr(finf)}
        _meta(cfg, out, meta)
        traj = integrate_vp(ens, params, cfg.t_end, cfg.checkpoints, cfg.diag_interval, tests, out)
    write_diagnostics(out / "diagnostics.csv", traj.records)
    _meta(cfg, out, {**meta, "steps": traj.n_steps, "wall_time": f"{traj.wall_time:.3f}"})
    if figures:
        from .report import render_run

        render_run(traj, cfg, out)
    return traj


# ------------------------------------------------------------------ sweep


def fit_rate(pairs) -> float:
    """Least-squares slope of ln(value) against ln(eps).

    Pairs with non-positive value are dropped (logged); fewer than two
    remaining raises ParameterError.
    """
    pts = [(float(e), float(v)) for e, v in pairs]
    kept = [(e, v) for e, v in pts if v > 0 and e > 0 and math.isfinite(v)]
    if len(kept) < len(pts):
        log.warning("fit_rate: dropped %d non-positive value(s)", len(pts) - len(kept))
    if len(kept) < 2:
        raise ParameterError("fit_rate needs at least two positive values")
    x = np.log([e for e, _ in kept])
    y = np.log([v for _, v in kept])
    xm, ym = x.mean(), y.mean()
    denom = float(((x - xm) ** 2).sum())
    if denom == 0.0:
        raise ParameterError("fit_rate needs at least two distinct eps values")
    return float(((x - xm) * (y - ym)).sum() / denom)


@dataclass
class SweepTable:
    rows: list[SweepRow] = field(default_factory=list)
    rates: dict[tuple[str, float], float] = field(default_factory=dict)
    euler: Trajectory | None = None
    runs: dict[float, Trajectory] = field(default_factory=dict)

    def column(self, name: str, t: float) -> list[tuple[float, float]]:
        return [(r.epsilon, getattr(r, name)) for r in self.rows
                if r.status == "ok" and abs(r.t - t) < 1e-9]

    @property
    def failed(self) -> bool:
        return any(r.status != "ok" for r in self.rows)

    def to_csv(self) -> str:
        lines = ["epsilon,t,dist_rho,dist_gyro,weak_residual,weak_residual_sup,status"]
        for r in self.rows:
            lines.append(",".join([format(r.epsilon, ".17g"), format(r.t, ".17g"),
                                   format(r.dist_rho, ".17g"), format(r.dist_gyro, ".17g"),
                                   format(r.weak_residual, ".17g"), format(r.weak_residual_sup, ".17g"),
                                   r.status]))
        return "\n".join(lines) + "\n"

    def rates_csv(self) -> str:
        lines = ["quantity,t,slope"]
        lines += [f"{q},{t:.17g},{s:.17g}" for (q, t), s in sorted(self.rates.items())]
        return "\n".join(lines) + "\n"


def _vp_job(spec: SweepSpec, eps: float, delta: float, out: Path | None,
            euler_snaps: dict[float, VortexEnsemble]):
    tests = get_library(spec.test_set, spec.test_scale)
    eta = spec.eta_for(eps)
    ens = initial_ensemble(spec, eps, eta)
    kind, tree = _solver(spec)
    dt = default_dt(eps, spec.steps_per_gyroperiod)
    params = VPStepParams(dt=dt, mode="self", delta=delta, solver=kind, tree=tree)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        finf = monokinetic_finf(spec.initial.rho0_profile(), spec.initial.velocity_shape(), eta)
        _meta(spec, out, {"kind": "vp", "epsilon": repr(eps), "eta": repr(eta), "delta": repr(delta),
                          "dt": repr(dt), "n": ens.n, "finf": repr(finf)})
    traj = integrate_vp(ens, params, spec.t_end, spec.checkpoints, spec.diag_interval, tests, out)
    if out is not None:
        write_diagnostics(out / "diagnostics.csv", traj.records)
    rows = []
    for t in spec.checkpoints:
        snap = traj.snapshot_at(t)
        ev = euler_snaps[t]
        gc = z_transform(snap)
        rec = traj.record_at(t)
        rows.append(SweepRow(
            eps, t,
            dual_distance((snap.x, snap.w), (ev.z, ev.w), tests),
            dual_distance((gc.z, gc.w), (ev.z, ev.w), tests),
            max(abs(v) for v in rec.wres.values()),
            weak_residual_sup=traj.wres_sup.get(min(traj.wres_sup, key=lambda s: abs(s - t)), math.nan),
        ))
    return rows, traj


def run_sweep(spec: SweepSpec, out_dir: Path | None = None, figures: bool = True,
              keep_runs: bool = False) -> SweepTable:
    """Euler reference once, then one VP run per epsilon from matched data.

    A failing epsilon produces rows with ``status`` set to the error and does
    not stop the remaining runs.
    """
    if len(spec.epsilons) < 2:
        raise ParameterError("a sweep needs at least two epsilon values")
    out = Path(out_dir) if out_dir is not None else (Path(spec.output_dir) if spec.output_dir else None)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    set_threads(spec.threads)
    tests = get_library(spec.test_set, spec.test_scale)
    vort = initial_vortices(spec)
    delta = resolve_delta(spec, vort.z)
    kind, tree = _solver(spec)
    eout = out / "euler" if out is not None else None
    if eout is not None:
        eout.mkdir(parents=True, exist_ok=True)
        _meta(spec, eout, {"kind": "euler", "delta": repr(delta), "dt": repr(spec.euler_dt), "n": vort.n})
    euler = integrate_euler(vort, spec.euler_dt, spec.t_end, delta, Solver(kind, tree),
                            spec.checkpoints, spec.diag_interval, tests, eout)
    if eout is not None:
        write_diagnostics(eout / "diagnostics.csv", euler.records)
    snaps = {t: euler.snapshot_at(t) for t in spec.checkpoints}
    table = SweepTable(euler=euler)

    def sub(eps):
        return out / f"vp_eps{eps:g}" if out is not None else None

    results: dict[float, object] = {}
    if spec.jobs > 1:
        with ProcessPoolExecutor(max_workers=spec.jobs) as pool:
            futs = {eps: pool.submit(_vp_job, spec, eps, delta, sub(eps), snaps) for eps in spec.epsilons}
            for eps, fut in futs.items():
                try:
                    results[eps] = fut.result()
                except Exception as exc:  # a failed row never aborts the sweep
                    results[eps] = exc
    else:
        for eps in spec.epsilons:
            try:
                results[eps] = _vp_job(spec, eps, delta, sub(eps), snaps)
            except Exception as exc:
                results[eps] = exc
    for eps in spec.epsilons:
        res = results[eps]
        if isinstance(res, Exception):
            log.error("sweep row eps=%g failed: %s", eps, res)
            status = f"failed: {type(res).__name__}: {res}".replace(",", ";").replace("\n", " ")
            table.rows += [SweepRow(eps, t, math.nan, math.nan, math.nan, status) for t in spec.checkpoints]
            continue
        rows, traj = res
        table.rows += rows
        if keep_runs:
            table.runs[eps] = traj
    for t in spec.checkpoints:
        for q in ("dist_rho", "dist_gyro", "weak_residual", "weak_residual_sup"):
            try:
                table.rates[(q, t)] = fit_rate(table.column(q, t))
            except ParameterError:
                table.rates[(q, t)] = math.nan
    if out is not None:
        (out / "sweep.csv").write_text(table.to_csv())
        (out / "rates.csv").write_text(table.rates_csv())
        _meta(spec, out, {"kind": "sweep", "delta": repr(delta), "euler_n": vort.n})
        if figures:
            from .report import render_sweep

            render_sweep(table, out)
    return table


def admissibility_for(cfg: RunConfig | SweepSpec):
    """Admissibility report of the monokinetic family the config generates."""
    from .ensemble import admissibility_report

    rho0, F = cfg.initial.rho0_profile(), cfg.initial.velocity_shape()
    if isinstance(cfg, SweepSpec):
        eps = list(cfg.epsilons)
        finf = [monokinetic_finf(rho0, F, cfg.eta_for(e)) for e in eps]
    else:
        eps = [cfg.epsilon if cfg.epsilon is not None else 1.0]
        finf = [monokinetic_finf(rho0, F, cfg.initial.eta)]
    return admissibility_report(eps, finf)


def with_output(cfg, out: Path):
    return replace(cfg, output_dir=str(out))
