"""INI-style run and sweep configuration (schema in docs/config.md).

Every key has a default that is materialized into the parsed object, and
:func:`serialize` writes every key back, so parse -> serialize -> parse is
the identity. Unknown sections or keys are rejected.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .errors import ConfigError
from .profiles import MeanVelocity, PatchProfile, VelocityShape

MODES = ("vp", "euler", "external-field-test")


def _float(key: str, s: str) -> float:
    try:
        return float(s)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {s!r}") from None


def _int(key: str, s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ConfigError(key, f"expected an integer, got {s!r}") from None


def _floats(key: str, s: str) -> tuple[float, ...]:
    return tuple(_float(key, p) for p in s.replace(" ", "").split(",") if p)


def _choice(options):
    def parse(key: str, s: str) -> str:
        if s not in options:
            raise ConfigError(key, f"must be one of {', '.join(options)}; got {s!r}")
        return s
    return parse


def _auto_float(key: str, s: str) -> float | None:
    return None if s == "auto" else _float(key, s)


def _str(key: str, s: str) -> str:
    return s


def _fmt(v) -> str:
    if v is None:
        return "auto"
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class InitialConfig:
    rho0: str = "perturbed_patch"
    radius: float = 1.0
    amplitude: float = 0.2
    mode: int = 3
    power: int = 3
    mass: float = 1.0
    velocity: str = "bump"
    u: str = "zero"
    u1: float = 0.0
    u2: float = 0.0
    swirl: float = 0.0
    eta: float = 1.0
    mx: int = 24
    mv: int = 6

    def rho0_profile(self) -> PatchProfile:
        return PatchProfile(self.rho0, self.radius, self.amplitude, self.mode, self.power, self.mass)

    def velocity_shape(self) -> VelocityShape:
        return VelocityShape(self.velocity)

    def mean_velocity(self) -> MeanVelocity:
        return MeanVelocity(self.u, self.u1, self.u2, self.swirl)

    def x_box(self) -> tuple[float, float, float, float]:
        L = self.rho0_profile().extent
        return (-L, L, -L, L)


@dataclass(frozen=True)
class FieldConfig:
    solver: str = "direct"
    theta: float = 0.5
    leaf_capacity: int = 16
    tree_order: int = 2
    delta: float | None = None  # None: 0.5 * initial spatial cell spacing
    external_E: tuple[float, float] = (1.0, 0.0)


@dataclass(frozen=True)
class RunConfig:
    mode: str = "vp"
    t_end: float = 1.0
    checkpoints: tuple[float, ...] = (1.0,)
    diag_interval: float = 0.1
    output_dir: str = "runs/out"
    threads: int = 1
    epsilon: float | None = None
    steps_per_gyroperiod: int = 32
    dt: float | None = None  # None: gyroperiod / steps_per_gyroperiod (vp), 1e-3 (euler)
    euler_dt: float = 1e-3
    test_set: str = "standard"
    test_scale: float = 1.0
    initial: InitialConfig = field(default_factory=InitialConfig)
    field: FieldConfig = field(default_factory=FieldConfig)


@dataclass(frozen=True)
class SweepSpec:
    epsilons: tuple[float, ...] = (0.2, 0.1, 0.05)
    eta_rule: str = "sqrt_eps"
    eta: float = 1.0
    jobs: int = 1
    t_end: float = 1.0
    checkpoints: tuple[float, ...] = (0.5, 1.0)
    diag_interval: float = 0.1
    output_dir: str = "runs/sweep"
    threads: int = 1
    steps_per_gyroperiod: int = 32
    euler_dt: float = 1e-3
    test_set: str = "standard"
    test_scale: float = 1.0
    initial: InitialConfig = field(default_factory=InitialConfig)
    field: FieldConfig = field(default_factory=FieldConfig)

    def eta_for(self, eps: float) -> float:
        return eps**0.5 if self.eta_rule == "sqrt_eps" else self.eta


# (section, key) -> (attribute path, parser)
_COMMON = {
    ("run", "t_end"): ("t_end", _float),
    ("run", "checkpoints"): ("checkpoints", _floats),
    ("run", "diag_interval"): ("diag_interval", _float),
    ("run", "output_dir"): ("output_dir", _str),
    ("run", "threads"): ("threads", _int),
    ("vp", "steps_per_gyroperiod"): ("steps_per_gyroperiod", _int),
    ("euler", "dt"): ("euler_dt", _float),
    ("diagnostics", "test_set"): ("test_set", _str),
    ("diagnostics", "test_scale"): ("test_scale", _float),
    ("initial", "rho0"): ("initial.rho0", _choice(("perturbed_patch", "bump", "square"))),
    ("initial", "radius"): ("initial.radius", _float),
    ("initial", "amplitude"): ("initial.amplitude", _float),
    ("initial", "mode"): ("initial.mode", _int),
    ("initial", "power"): ("initial.power", _int),
    ("initial", "mass"): ("initial.mass", _float),
    ("initial", "velocity"): ("initial.velocity", _choice(("bump", "uniform_disk"))),
    ("initial", "u"): ("initial.u", _choice(("zero", "constant", "swirl"))),
    ("initial", "u1"): ("initial.u1", _float),
    ("initial", "u2"): ("initial.u2", _float),
    ("initial", "swirl"): ("initial.swirl", _float),
    ("initial", "mx"): ("initial.mx", _int),
    ("initial", "mv"): ("initial.mv", _int),
    ("field", "solver"): ("field.solver", _choice(("direct", "tree"))),
    ("field", "theta"): ("field.theta", _float),
    ("field", "leaf_capacity"): ("field.leaf_capacity", _int),
    ("field", "tree_order"): ("field.tree_order", _int),
    ("field", "delta"): ("field.delta", _auto_float),
}
_RUN_ONLY = {
    ("run", "mode"): ("mode", _choice(MODES)),
    ("vp", "epsilon"): ("epsilon", _float),
    ("vp", "dt"): ("dt", _auto_float),
    ("initial", "eta"): ("initial.eta", _float),
    ("field", "external_E"): ("field.external_E", _floats),
}
_SWEEP_ONLY = {
    ("sweep", "epsilons"): ("epsilons", _floats),
    ("sweep", "eta_rule"): ("eta_rule", _choice(("sqrt_eps", "fixed"))),
    ("sweep", "eta"): ("eta", _float),
    ("sweep", "jobs"): ("jobs", _int),
}
RUN_SCHEMA = {**_COMMON, **_RUN_ONLY}
SWEEP_SCHEMA = {**_COMMON, **_SWEEP_ONLY}


def _get(obj, path: str):
    for part in path.split("."):
        obj = getattr(obj, part)
    return obj


def _set(obj, path: str, value):
    head, _, rest = path.partition(".")
    if not rest:
        return replace(obj, **{head: value})
    return replace(obj, **{head: _set(getattr(obj, head), rest, value)})


def _validate_common(c, name_eps: str | None = None) -> None:
    if not c.t_end > 0:
        raise ConfigError("t_end", "must be > 0")
    cps = c.checkpoints
    if list(cps) != sorted(cps) or any(t < 0 or t > c.t_end * (1 + 1e-12) for t in cps):
        raise ConfigError("checkpoints", "must be sorted and lie in [0, t_end]")
    if not c.diag_interval > 0:
        raise ConfigError("diag_interval", "must be > 0")
    if c.threads < 1:
        raise ConfigError("threads", "must be >= 1")
    if c.steps_per_gyroperiod < 8:
        raise ConfigError("steps_per_gyroperiod", "must be >= 8 to resolve the gyration")
    if not c.euler_dt > 0:
        raise ConfigError("dt", "euler dt must be > 0")
    ini = c.initial
    if ini.mx < 1 or ini.mv < 1:
        raise ConfigError("mx" if ini.mx < 1 else "mv", "resolution must be >= 1")
    if not ini.radius > 0:
        raise ConfigError("radius", "must be > 0")
    if not 0 <= ini.amplitude < 1:
        raise ConfigError("amplitude", "must lie in [0, 1)")
    if ini.power < 1:
        raise ConfigError("power", "must be >= 1")
    if not ini.mass > 0:
        raise ConfigError("mass", "must be > 0")
    from .testfunctions import LIBRARIES

    if c.test_set not in LIBRARIES:
        raise ConfigError("test_set", f"must be one of {', '.join(sorted(LIBRARIES))}")
    if not c.test_scale > 0:
        raise ConfigError("test_scale", "must be > 0")
    f = c.field
    if not 0 < f.theta <= 1:
        raise ConfigError("theta", "must lie in (0, 1]")
    if f.leaf_capacity < 1:
        raise ConfigError("leaf_capacity", "must be >= 1")
    if f.tree_order not in (0, 1, 2):
        raise ConfigError("tree_order", "must be 0, 1 or 2")
    if f.delta is not None and f.delta < 0:
        raise ConfigError("delta", "must be >= 0 or 'auto'")


def validate(c: RunConfig | SweepSpec) -> None:
    _validate_common(c)
    if isinstance(c, SweepSpec):
        if len(c.epsilons) < 2:
            raise ConfigError("epsilons", "a sweep needs at least two values")
        if any(b >= a for a, b in zip(c.epsilons, c.epsilons[1:])) or min(c.epsilons) <= 0:
            raise ConfigError("epsilons", "must be positive and strictly decreasing")
        if not c.eta > 0:
            raise ConfigError("eta", "must be > 0")
        if c.jobs < 1:
            raise ConfigError("jobs", "must be >= 1")
        return
    if c.mode in ("vp", "external-field-test"):
        if c.epsilon is None:
            raise ConfigError("epsilon", f"required in {c.mode} mode")
        if not c.epsilon > 0:
            raise ConfigError("epsilon", "must be > 0")
    if c.dt is not None and not c.dt > 0:
        raise ConfigError("dt", "must be > 0 or 'auto'")
    if not c.initial.eta > 0:
        raise ConfigError("eta", "must be > 0")
    if len(c.field.external_E) != 2:
        raise ConfigError("external_E", "needs two components")


def _reader() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    cp.optionxform = str
    return cp


def parse_text(text: str) -> RunConfig | SweepSpec:
    cp = _reader()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc).splitlines()[0]) from None
    is_sweep = cp.has_section("sweep")
    schema = SWEEP_SCHEMA if is_sweep else RUN_SCHEMA
    obj: RunConfig | SweepSpec = SweepSpec() if is_sweep else RunConfig()
    known_sections = {s for s, _ in schema}
    for sec in cp.sections():
        if sec not in known_sections:
            raise ConfigError(sec, "unknown section")
        for key, raw in cp.items(sec):
            if (sec, key) not in schema:
                raise ConfigError(key, f"unknown key in [{sec}]")
            path, parser = schema[(sec, key)]
            obj = _set(obj, path, parser(key, raw.strip()))
    if not is_sweep and not cp.has_option("run", "checkpoints"):
        obj = replace(obj, checkpoints=(obj.t_end,))
    validate(obj)
    return obj


def parse_config(path: str | Path) -> RunConfig | SweepSpec:
    """Parse and validate a run or sweep file (a [sweep] section marks a sweep)."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError("file", f"{p} does not exist")
    return parse_text(p.read_text())


def serialize(c: RunConfig | SweepSpec) -> str:
    """All keys, grouped by section, in schema order."""
    schema = SWEEP_SCHEMA if isinstance(c, SweepSpec) else RUN_SCHEMA
    order = ["sweep", "run", "initial", "vp", "euler", "field", "diagnostics"]
    out = []
    for sec in order:
        keys = [(k, path) for (s, k), (path, _) in schema.items() if s == sec]
        if not keys:
            continue
        out.append(f"[{sec}]")
        for k, path in keys:
            v = _get(c, path)
            if v is None and schema[(sec, k)][1] is not _auto_float:
                continue  # optional key left unset (e.g. epsilon in euler mode)
            out.append(f"{k} = {_fmt(v)}")
        out.append("")
    return "\n".join(out)


def field_names(cls) -> list[str]:
    return [f.name for f in fields(cls)]
