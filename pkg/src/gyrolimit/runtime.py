"""Shared run bookkeeping: event-time segmentation and trajectories."""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import DiagnosticRecord
from .ensemble import ParticleEnsemble, VortexEnsemble


def event_times(t_end: float, checkpoints: Iterable[float], diag_interval: float | None) -> list[float]:
    """Sorted union of 0, t_end, checkpoints and multiples of diag_interval."""
    ts = {0.0, float(t_end), *map(float, checkpoints)}
    if diag_interval:
        k = int(math.floor(t_end / diag_interval + 1e-9))
        ts.update(round(i * diag_interval, 12) for i in range(k + 1))
    return sorted(t for t in ts if 0.0 <= t <= t_end)


def segment_steps(a: float, b: float, dt_max: float) -> tuple[int, float]:
    """Number of uniform steps of size <= dt_max covering [a, b]."""
    n = max(1, int(math.ceil((b - a) / dt_max - 1e-9)))
    return n, (b - a) / n


def matches(t: float, targets: Iterable[float]) -> bool:
    return any(abs(t - s) <= 1e-9 * max(1.0, abs(s)) for s in targets)


@dataclass
class Trajectory:
    kind: str
    delta: float
    dt: float
    epsilon: float | None = None
    snapshots: dict[float, ParticleEnsemble | VortexEnsemble] = field(default_factory=dict)
    records: list[DiagnosticRecord] = field(default_factory=list)
    n_steps: int = 0
    wall_time: float = 0.0
    wres_sup: dict[float, float] = field(default_factory=dict)

    def snapshot_at(self, t: float):
        for s, snap in self.snapshots.items():
            if abs(s - t) <= 1e-9 * max(1.0, abs(t)):
                return snap
        raise KeyError(t)

    def record_at(self, t: float) -> DiagnosticRecord:
        for r in self.records:
            if abs(r.t - t) <= 1e-9 * max(1.0, abs(t)):
                return r
        raise KeyError(t)

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])
