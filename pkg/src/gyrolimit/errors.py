"""Exception types. All derive from ValueError or RuntimeError so callers
that only care about the broad category can catch those."""


class DomainError(ValueError):
    """Argument outside the mathematical domain (e.g. zero displacement)."""


class ParameterError(ValueError):
    """Invalid numerical parameter (non-positive step, eta <= 0, ...)."""


class InputError(ValueError):
    """Inconsistent inputs (mismatched lengths, time outside a trajectory)."""


class ConfigError(ValueError):
    """Configuration schema violation. Carries the offending key."""

    def __init__(self, key: str, message: str) -> None:
        super().__init__(f"{key}: {message}")
        self.key = key


class StepRefused(ParameterError):
    """Time step too large for the gyroperiod; ``suggested_dt`` is admissible."""

    def __init__(self, dt: float, suggested_dt: float) -> None:
        super().__init__(f"dt={dt:g} does not resolve the gyroperiod; use dt <= {suggested_dt:.6g}")
        self.dt = dt
        self.suggested_dt = suggested_dt


class NonFiniteState(RuntimeError):
    """Non-finite positions or velocities appeared during integration."""

    def __init__(self, step: int, t: float, count: int) -> None:
        super().__init__(f"non-finite state at step {step} (t={t:.6g}): {count} particle(s) affected")
        self.step = step
        self.t = t
        self.count = count
