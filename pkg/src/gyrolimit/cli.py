"""Command line entry point: ``gyrolimit``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import RunConfig, SweepSpec, parse_config
from .errors import ConfigError

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _load(path: str, want: type, modes: tuple[str, ...] = ()):
    cfg = parse_config(path)
    if not isinstance(cfg, want):
        kind = "sweep spec" if isinstance(cfg, SweepSpec) else "run config"
        raise ConfigError("sweep" if want is RunConfig else "epsilons", f"{path} is a {kind}")
    if modes and cfg.mode not in modes:
        raise ConfigError("mode", f"expected one of {', '.join(modes)}, got {cfg.mode!r}")
    return cfg


def cmd_run(args) -> int:
    from .harness import execute_run

    modes = ("euler",) if args.family == "euler" else ("vp", "external-field-test")
    cfg = _load(args.config, RunConfig, modes)
    out = args.out or cfg.output_dir
    traj = execute_run(cfg, Path(out), figures=not args.no_figures)
    print(f"{traj.kind}: {traj.n_steps} steps, {traj.wall_time:.1f}s -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import run_sweep

    spec = _load(args.spec, SweepSpec)
    out = Path(args.out or spec.output_dir)
    table = run_sweep(spec, out, figures=not args.no_figures)
    sys.stdout.write(table.to_csv())
    sys.stdout.write(table.rates_csv())
    return EXIT_RUNTIME if table.failed else EXIT_OK


def cmd_diag(args) -> int:
    """Recompute diagnostics from the snapshots of a finished run."""
    from .diagnostics import Frame, record_for, vortex_record, weak_residual
    from .ensemble import ParticleEnsemble
    from .io import list_snapshots, read_meta, read_snapshot, write_diagnostics
    from .report import plot_diagnostics
    from .testfunctions import get_library

    run = Path(args.run_dir)
    meta_path = run / "meta.txt"
    if not meta_path.is_file():
        raise ConfigError("run-dir", f"{run} has no meta.txt")
    meta = read_meta(meta_path)
    eps = float(meta.get("epsilon", "0") or 0)
    delta = float(meta.get("delta", "0"))
    snaps = [(t, read_snapshot(p, eps)) for t, p in list_snapshots(run)]
    if not snaps:
        raise ConfigError("run-dir", f"{run} has no snapshots")
    records = [record_for(s, t, delta) if isinstance(s, ParticleEnsemble) else vortex_record(s, t, delta)
               for t, s in snaps]
    write_diagnostics(run / "diag_recomputed.csv", records)
    plot_diagnostics(records, run / "diag_recomputed.png")
    cols = ("t", "energy", "kinetic", "modified_moment", "second_moment", "J1", "symmetrization")
    print(",".join(cols))
    for r in records:
        print(",".join(format(getattr(r, c), ".17g") for c in cols))
    if args.phi:
        lib = {phi.name: phi for phi in get_library("standard")}
        if args.phi not in lib:
            raise ConfigError("phi", f"unknown test function; choose from {', '.join(lib)}")
        t = args.at if args.at is not None else snaps[-1][0]
        frames = [Frame(tt, s.x if isinstance(s, ParticleEnsemble) else s.z, s.w) for tt, s in snaps]
        val = weak_residual(frames, lib[args.phi], t, delta)
        print(f"# weak residual ({args.phi}, t={t:g}, snapshot cadence) = {val:.17g}")
    return EXIT_OK


def cmd_admissibility(args) -> int:
    from .harness import admissibility_for

    cfg = parse_config(args.spec)
    rep = admissibility_for(cfg)
    sys.stdout.write(rep.to_csv())
    for note in rep.notes:
        print(f"# {note}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gyrolimit", description="Gyrokinetic-limit experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for family in ("vp", "euler"):
        fp = sub.add_parser(family, help=f"{family} simulations")
        fsub = fp.add_subparsers(dest="action", required=True)
        r = fsub.add_parser("run", help="run a configuration")
        r.add_argument("config")
        r.add_argument("--out", help="override output_dir")
        r.add_argument("--no-figures", action="store_true")
        r.set_defaults(func=cmd_run, family=family)
    s = sub.add_parser("sweep", help="epsilon sweep against the Euler reference")
    s.add_argument("spec")
    s.add_argument("--out")
    s.add_argument("--no-figures", action="store_true")
    s.set_defaults(func=cmd_sweep)
    d = sub.add_parser("diag", help="recompute diagnostics of a run directory")
    d.add_argument("run_dir")
    d.add_argument("--phi", help="test function name for a weak residual")
    d.add_argument("--at", type=float, help="time of the weak residual (default: last snapshot)")
    d.set_defaults(func=cmd_diag)
    a = sub.add_parser("check-admissibility", help="eps^2 Theta(||f0||) along a sweep")
    a.add_argument("spec")
    a.set_defaults(func=cmd_admissibility)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
