"""CSV snapshot, grid and diagnostic files.

Floats are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
import re
from collections.abc import Sequence
from pathlib import Path

import numpy as np

from .diagnostics import RECORD_COLUMNS, DiagnosticRecord
from .ensemble import DensityGrid, GridSpec, ParticleEnsemble, VortexEnsemble
from .errors import InputError

PHASE_HEADER = ("id", "x1", "x2", "v1", "v2", "w")
VORTEX_HEADER = ("id", "z1", "z2", "w")
_SNAP_RE = re.compile(r"snap_t([0-9.eE+-]+)\.csv$")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def snapshot_name(t: float) -> str:
    return f"snap_t{t:.6f}.csv"


def write_phase_snapshot(path: Path, ens: ParticleEnsemble) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(PHASE_HEADER)
        for i in range(ens.n):
            wr.writerow([i, *map(_fmt, (ens.x[i, 0], ens.x[i, 1], ens.v[i, 0], ens.v[i, 1], ens.w[i]))])


def write_vortex_snapshot(path: Path, z: np.ndarray, w: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(VORTEX_HEADER)
        for i in range(z.shape[0]):
            wr.writerow([i, _fmt(z[i, 0]), _fmt(z[i, 1]), _fmt(w[i])])


def read_snapshot(path: Path, epsilon: float = 0.0) -> ParticleEnsemble | VortexEnsemble:
    """Read either schema; phase snapshots need ``epsilon`` from run metadata."""
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        rows = np.array([[float(c) for c in r] for r in rd]).reshape(-1, len(header))
    if header == PHASE_HEADER:
        return ParticleEnsemble(rows[:, 1:3], rows[:, 3:5], rows[:, 5], epsilon)
    if header == VORTEX_HEADER:
        return VortexEnsemble(rows[:, 1:3], rows[:, 3])
    raise InputError(f"{path}: unrecognised snapshot header {header}")


def list_snapshots(run_dir: Path) -> list[tuple[float, Path]]:
    out = []
    for p in Path(run_dir).iterdir():
        m = _SNAP_RE.match(p.name)
        if m:
            out.append((float(m.group(1)), p))
    return sorted(out)


def write_grid(path: Path, grid: DensityGrid) -> None:
    """``i,j,value`` CSV plus a ``.meta`` sidecar with origin, h, nx, ny."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("i", "j", "value"))
        for i in range(grid.spec.nx):
            for j in range(grid.spec.ny):
                wr.writerow((i, j, _fmt(grid.values[i, j])))
    s = grid.spec
    path.with_suffix(".meta").write_text(
        f"origin_x = {_fmt(s.origin[0])}\norigin_y = {_fmt(s.origin[1])}\nh = {_fmt(s.h)}\n"
        f"nx = {s.nx}\nny = {s.ny}\nclipped_mass = {_fmt(grid.clipped_mass)}\n"
    )


def read_grid(path: Path) -> DensityGrid:
    path = Path(path)
    meta = dict(
        (k.strip(), v.strip())
        for k, v in (ln.split("=", 1) for ln in path.with_suffix(".meta").read_text().splitlines() if "=" in ln)
    )
    spec = GridSpec((float(meta["origin_x"]), float(meta["origin_y"])), float(meta["h"]),
                    int(meta["nx"]), int(meta["ny"]))
    values = np.zeros((spec.nx, spec.ny))
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        next(rd)
        for i, j, v in rd:
            values[int(i), int(j)] = float(v)
    return DensityGrid(spec, values, float(meta["clipped_mass"]))


def write_diagnostics(path: Path, records: Sequence[DiagnosticRecord]) -> None:
    names = list(records[0].wres) if records else []
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(list(RECORD_COLUMNS) + [f"wres_{n}" for n in names])
        for r in records:
            wr.writerow([_fmt(v) for v in r.row()])


def read_diagnostics(path: Path) -> list[DiagnosticRecord]:
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = next(rd)
        out = []
        for row in rd:
            vals = dict(zip(header, map(float, row)))
            wres = {k[5:]: v for k, v in vals.items() if k.startswith("wres_")}
            out.append(DiagnosticRecord(*(vals[c] for c in RECORD_COLUMNS), wres=wres))
    return out


def write_meta(path: Path, entries: dict[str, object], config_text: str | None = None) -> None:
    lines = [f"{k} = {v}" for k, v in entries.items()]
    if config_text is not None:
        lines += ["", "# resolved configuration", config_text.rstrip()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_meta(path: Path) -> dict[str, str]:
    out = {}
    for ln in Path(path).read_text().splitlines():
        if ln.startswith("#") or not ln.strip():
            if ln.startswith("# resolved configuration"):
                break
            continue
        k, _, v = ln.partition("=")
        out[k.strip()] = v.strip()
    return out
