"""Matplotlib figures written next to the CSV outputs (Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .diagnostics import DiagnosticRecord  # noqa: E402
from .ensemble import DensityGrid, GridSpec, ParticleEnsemble, deposit_density  # noqa: E402
from .gyro import z_transform  # noqa: E402
from .io import write_grid  # noqa: E402

_SERIES = (("energy", "energy"), ("modified_moment", "modified moment"),
           ("kinetic", "kinetic"), ("J1", "J1"))


def plot_diagnostics(records: list[DiagnosticRecord], path: Path, title: str = "") -> Path:
    """Drift of the conserved quantities and the weak residuals over time."""
    t = np.array([r.t for r in records])
    fig, axes = plt.subplots(1, 2, figsize=(10, 3.8))
    ax = axes[0]
    for name, label in _SERIES:
        y = np.array([getattr(r, name) for r in records])
        if not np.isfinite(y).all() or not np.any(y):
            continue
        scale = max(abs(y[0]), 1e-300)
        ax.plot(t, (y - y[0]) / scale, marker=".", label=label)
    ax.set_xlabel("t")
    ax.set_ylabel("relative drift")
    ax.legend(fontsize=8)
    ax = axes[1]
    names = list(records[0].wres) if records else []
    for name in names:
        ax.plot(t, [abs(r.wres.get(name, np.nan)) for r in records], lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("|weak residual|")
    if names:
        ax.set_yscale("symlog", linthresh=1e-12)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_density(grid: DensityGrid, path: Path, title: str = "") -> Path:
    s = grid.spec
    extent = (s.origin[0], s.origin[0] + s.nx * s.h, s.origin[1], s.origin[1] + s.ny * s.h)
    fig, ax = plt.subplots(figsize=(4.6, 4))
    im = ax.imshow(grid.values.T, origin="lower", extent=extent, cmap="viridis")
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def _grid_for(points: np.ndarray, n: int = 96) -> GridSpec:
    L = float(np.abs(points).max()) * 1.1 + 1e-12
    return GridSpec.covering((-L, L, -L, L), n)


def render_run(traj, cfg, out: Path) -> list[Path]:
    """diagnostics.png plus one density image (and grid CSV) per checkpoint."""
    out = Path(out)
    made = []
    if traj.records:
        made.append(plot_diagnostics(traj.records, out / "diagnostics.png", title=traj.kind))
    for t, snap in sorted(traj.snapshots.items()):
        if isinstance(snap, ParticleEnsemble):
            pts, w, label = snap.x, snap.w, "rho"
        else:
            pts, w, label = snap.z, snap.w, "omega"
        grid = deposit_density(pts, w, _grid_for(pts))
        write_grid(out / f"{label}_t{t:.6f}.csv", grid)
        made.append(plot_density(grid, out / f"{label}_t{t:.6f}.png", f"{label}  t={t:g}"))
        if isinstance(snap, ParticleEnsemble):
            gc = z_transform(snap)
            g2 = deposit_density(gc.z, gc.w, grid.spec)
            write_grid(out / f"rho_gyro_t{t:.6f}.csv", g2)
            made.append(plot_density(g2, out / f"rho_gyro_t{t:.6f}.png", f"gyro rho  t={t:g}"))
    return made


def plot_sweep(table, path: Path) -> Path:
    """Log-log convergence of the sweep quantities against epsilon."""
    times = sorted({r.t for r in table.rows})
    fig, axes = plt.subplots(1, len(times), figsize=(4.5 * len(times), 3.8), squeeze=False)
    for ax, t in zip(axes[0], times):
        for q, marker in (("dist_rho", "o"), ("dist_gyro", "s"), ("weak_residual", "^")):
            pts = [(e, v) for e, v in table.column(q, t) if v > 0]
            if not pts:
                continue
            e, v = np.array(pts).T
            slope = table.rates.get((q, t), np.nan)
            ax.loglog(e, v, marker=marker, label=f"{q} (slope {slope:.2f})")
        ax.set_xlabel("epsilon")
        ax.set_title(f"t = {t:g}")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_sweep(table, out: Path) -> Path:
    return plot_sweep(table, Path(out) / "convergence.png")
