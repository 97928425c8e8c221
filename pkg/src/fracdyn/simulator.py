"""Full-memory integration of the fractional-order map with impulsive control.

For order ``q`` the state obeys the discrete integral

    x(n) = x(0) + 1/Gamma(q) * sum_{j=1..n} Gamma(n-j+q)/Gamma(n-j+1) * f(x(j-1))

so every step is a dot product of the kernel against the whole history of
``f`` values.  With ``q = 1`` all weights are one and the sum telescopes to
``x(n) = x(n-1) + f(x(n-1))``.

``scheme="map"`` instead iterates the plain map ``x(n+1) = f(x(n))`` (the
integer-order system used for comparison diagrams); the same control
schedule applies.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .kernel import KernelTable, build_kernel, check_order
from .maps import Family, MapSpec, _CATALOG

DEFAULT_STEPS = 1000
DEFAULT_N_STAR = 500
DEFAULT_THRESHOLD = 1e6


class ControlMode(str, enum.Enum):
    NONE = "none"
    MULTIPLICATIVE = "mult"
    ADDITIVE = "add"


class Status(str, enum.Enum):
    COMPLETED = "completed"
    DIVERGED = "diverged"


class KernelMismatchError(ValueError):
    """Kernel built for another order, or too small for the requested run."""


@dataclass(frozen=True)
class SimConfig:
    map: MapSpec = field(default_factory=MapSpec)
    q: float = 0.8
    x0: float = 0.3
    steps: int = DEFAULT_STEPS
    divergence_threshold: float = DEFAULT_THRESHOLD
    scheme: str = "fractional"

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", check_order(self.q))
        if self.scheme not in ("fractional", "map"):
            raise ValueError(f"scheme must be 'fractional' or 'map', got {self.scheme!r}")
        if isinstance(self.steps, bool) or int(self.steps) != self.steps or self.steps < 1:
            raise ValueError(f"steps must be a positive integer, got {self.steps!r}")
        object.__setattr__(self, "steps", int(self.steps))
        x0 = float(self.x0)
        if not math.isfinite(x0):
            raise ValueError("x0 must be finite")
        if self.map.family is Family.GOMPERTZ and not 0.0 <= x0 <= 1.5:
            raise ValueError(f"gompertz x0 must lie in [0, 1.5], got {x0}")
        object.__setattr__(self, "x0", x0)
        if not self.divergence_threshold > 0:
            raise ValueError("divergence_threshold must be positive")


@dataclass(frozen=True)
class ControlSchedule:
    """Impulse every ``delta`` steps once the step counter reaches ``n_star``.

    At a firing step ``n`` the freshly integrated ``x(n+1)`` becomes
    ``(1 + gamma) * x(n+1)`` (multiplicative) or ``x(n+1) + gamma`` (additive).
    The counter is absolute: ``n % delta == 0``, not counted from ``n_star``.
    """

    mode: ControlMode = ControlMode.NONE
    gamma: float = 0.0
    delta: int = 1
    n_star: int = DEFAULT_N_STAR

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", ControlMode(self.mode))
        object.__setattr__(self, "gamma", float(self.gamma))
        if int(self.delta) != self.delta or self.delta < 1:
            raise ValueError(f"delta must be a positive integer, got {self.delta!r}")
        if int(self.n_star) != self.n_star or self.n_star < 0:
            raise ValueError(f"n_star must be a nonnegative integer, got {self.n_star!r}")
        object.__setattr__(self, "delta", int(self.delta))
        object.__setattr__(self, "n_star", int(self.n_star))

    def fires(self, n: int) -> bool:
        return self.mode is not ControlMode.NONE and n >= self.n_star and n % self.delta == 0

    def apply(self, value: float) -> float:
        if self.mode is ControlMode.MULTIPLICATIVE:
            return (1.0 + self.gamma) * value
        if self.mode is ControlMode.ADDITIVE:
            return value + self.gamma
        return value


NO_CONTROL = ControlSchedule()


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Orbit samples ``x(0..n_end)``.

    ``control_events`` holds the step indices ``n`` whose impulse modified
    ``x(n+1)``.  On divergence ``samples`` keeps only the finite, in-domain
    prefix and ``diverged_at`` is the index of the offending state.
    """

    samples: np.ndarray
    status: Status
    control_events: frozenset[int]
    config: SimConfig
    control: ControlSchedule
    diverged_at: int | None = None
    reason: str | None = None

    @property
    def completed(self) -> bool:
        return self.status is Status.COMPLETED

    @property
    def n_end(self) -> int:
        return len(self.samples) - 1

    def impulse_mask(self) -> np.ndarray:
        """Boolean per sample: True at step ``n`` when the impulse fired there."""
        mask = np.zeros(len(self.samples), dtype=bool)
        for n in self.control_events:
            mask[n] = True
        return mask


def _check_kernel(config: SimConfig, kernel: KernelTable | None) -> KernelTable | None:
    if config.scheme == "map":
        return kernel
    if kernel is None:
        return build_kernel(config.q, config.steps)
    if kernel.q != config.q:
        raise KernelMismatchError(f"kernel built for q={kernel.q}, config has q={config.q}")
    if kernel.capacity < config.steps:
        raise KernelMismatchError(
            f"kernel capacity {kernel.capacity} < requested steps {config.steps}"
        )
    return kernel


def _violation(config: SimConfig, value: float) -> str | None:
    if not math.isfinite(value):
        return "non-finite state"
    if abs(value) > config.divergence_threshold:
        return f"|x| exceeds {config.divergence_threshold:g}"
    if not _CATALOG[config.map.family].in_domain(value):
        return "state outside map domain"
    return None


def simulate(
    config: SimConfig,
    kernel: KernelTable | None = None,
    control: ControlSchedule = NO_CONTROL,
) -> Trajectory:
    """Integrate ``config.steps`` steps, stopping early on divergence."""
    kernel = _check_kernel(config, kernel)
    spec = config.map
    f = _CATALOG[spec.family].value
    n_steps = config.steps

    x = np.empty(n_steps + 1)
    fx = np.empty(n_steps)
    x[0] = config.x0
    events: list[int] = []
    reason = _violation(config, config.x0)
    if reason is not None:
        return Trajectory(x[:0], Status.DIVERGED, frozenset(), config, control, 0, reason)

    rev = kernel.reversed if kernel is not None else None
    cap = kernel.capacity if kernel is not None else 0
    gamma_q = kernel.gamma_q if kernel is not None else 1.0
    for n in range(n_steps):
        fx[n] = f(spec, x[n])
        if rev is None:
            value = float(fx[n])
        else:
            value = config.x0 + float(rev[cap - n - 1 :] @ fx[: n + 1]) / gamma_q
        if control.fires(n):
            value = control.apply(value)
            events.append(n)
        reason = _violation(config, value)
        if reason is not None:
            return Trajectory(
                x[: n + 1].copy(), Status.DIVERGED, frozenset(events), config, control, n + 1, reason
            )
        x[n + 1] = value
    return Trajectory(x, Status.COMPLETED, frozenset(events), config, control)


def memory_value(trajectory: Trajectory, kernel: KernelTable, n: int) -> float:
    """Recompute the integrated (pre-impulse) value of ``x(n)`` from stored history.

    Re-evaluates ``f`` on ``x(0..n-1)`` and forms the memory sum afresh; used
    to cross-check the incremental integrator.
    """
    config = trajectory.config
    if not 1 <= n <= trajectory.n_end:
        raise ValueError(f"n must lie in [1, {trajectory.n_end}]")
    history = np.array([_CATALOG[config.map.family].value(config.map, v) for v in trajectory.samples[:n]])
    return config.x0 + float(kernel.reversed[kernel.capacity - n :] @ history) / kernel.gamma_q


def with_param(config: SimConfig, control: ControlSchedule, axis: str, value: float):
    """Copy of ``(config, control)`` with one parameter replaced."""
    if axis == "r":
        return replace(config, map=replace(config.map, r=value)), control
    if axis == "p":
        return replace(config, map=replace(config.map, p=value)), control
    if axis == "q":
        return replace(config, q=value), control
    if axis == "gamma":
        return config, replace(control, gamma=value)
    raise ValueError(f"unknown sweep axis {axis!r}")
