"""Numerically stable periodic orbits and one-parameter bifurcation sweeps."""

from __future__ import annotations

import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernel import KernelTable, build_kernel
from .lyapunov import finite_time_exponent, lyapunov_exponent
from .simulator import (
    NO_CONTROL,
    ControlMode,
    ControlSchedule,
    SimConfig,
    Trajectory,
    simulate,
    with_param,
)
from .zero_one import Test01Config, run_test01

DEFAULT_TOLERANCE = 1e-3
DEFAULT_MAX_PERIOD = 32
DEFAULT_TAIL = 100
DEFAULT_SETTLE = 0.2
AXES = ("r", "p", "q", "gamma")


class TailTooShortError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class NspoResult:
    found: bool
    period: int | None = None
    closing_error: float = float("inf")
    elements: tuple[float, ...] = ()


def closing_errors(tail: np.ndarray, max_period: int) -> np.ndarray:
    """``max_n |x(n+T) - x(n)|`` over the tail, for ``T = 1..max_period``."""
    return np.array([np.max(np.abs(tail[T:] - tail[:-T])) for T in range(1, max_period + 1)])


def detect_nspo(
    orbit: Trajectory | np.ndarray,
    tolerance: float = DEFAULT_TOLERANCE,
    max_period: int = DEFAULT_MAX_PERIOD,
    tail_points: int = DEFAULT_TAIL,
) -> NspoResult:
    """Smallest period ``T <= max_period`` whose closing error over the tail is within tolerance.

    ``orbit`` is a completed trajectory or a plain array; its last
    ``tail_points`` samples are examined.
    """
    if isinstance(orbit, Trajectory):
        if not orbit.completed:
            raise ValueError("cannot look for periodic orbits in a diverged trajectory")
        orbit = orbit.samples
    tail = np.asarray(orbit, dtype=float)[-tail_points:]
    if tail.size < 3 * max_period:
        raise TailTooShortError(f"tail of {tail.size} samples is shorter than 3*max_period")
    errors = closing_errors(tail, max_period)
    hits = np.flatnonzero(errors <= tolerance)
    if hits.size == 0:
        return NspoResult(False, None, float(errors.min()))
    period = int(hits[0]) + 1
    return NspoResult(True, period, float(errors[hits[0]]), tuple(float(v) for v in tail[-period:]))


class Window(str, enum.Enum):
    CHAOTIC = "chaotic"
    REGULAR = "regular"
    DIVERGED = "diverged"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    lo: float
    hi: float
    grid_count: int
    config: SimConfig = field(default_factory=SimConfig)
    control: ControlSchedule = NO_CONTROL
    transient_cut: float = 0.5
    settle: float = DEFAULT_SETTLE
    tail_points: int = DEFAULT_TAIL
    tolerance: float = DEFAULT_TOLERANCE
    max_period: int = DEFAULT_MAX_PERIOD
    test01: Test01Config = field(default_factory=Test01Config)

    def __post_init__(self) -> None:
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if not self.lo < self.hi:
            raise ValueError("sweep range needs lo < hi")
        if self.grid_count < 2:
            raise ValueError("grid_count must be at least 2")
        if not 0.0 <= self.transient_cut < 1.0 or not 0.0 <= self.settle < 1.0:
            raise ValueError("transient_cut and settle must lie in [0, 1)")
        if self.tail_points < 3 * self.max_period:
            raise ValueError("tail_points must be at least 3 * max_period")

    def grid(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.grid_count)


@dataclass(frozen=True, eq=False)
class SweepRow:
    param_value: float
    tail: np.ndarray
    le: float | None
    K: float | None
    diverged: bool
    nspo: NspoResult
    note: str = ""


def measurement_start(
    config: SimConfig,
    control: ControlSchedule,
    transient_cut: float,
    settle: float = DEFAULT_SETTLE,
) -> int:
    """First step of the measured window.

    Uncontrolled runs skip ``transient_cut * steps``.  Controlled runs start
    at ``n_star`` and additionally skip ``settle`` of the remaining steps,
    the transient the impulses themselves cause.
    """
    if control.mode is not ControlMode.NONE:
        n_star = min(control.n_star, config.steps - 1)
        return n_star + int(settle * (config.steps - n_star))
    return int(transient_cut * config.steps)


@dataclass(frozen=True, eq=False)
class Analysis:
    trajectory: Trajectory
    le: float | None
    lambda_full: float | None
    K: float | None
    nspo: NspoResult
    note: str = ""


def analyze(
    config: SimConfig,
    control: ControlSchedule = NO_CONTROL,
    kernel: KernelTable | None = None,
    *,
    transient_cut: float = 0.5,
    settle: float = DEFAULT_SETTLE,
    tail_points: int = DEFAULT_TAIL,
    tolerance: float = DEFAULT_TOLERANCE,
    max_period: int = DEFAULT_MAX_PERIOD,
    test01: Test01Config = Test01Config(),
) -> Analysis:
    """Simulate once and measure exponent, K and NSPO over the measured window.

    The exponent reported as ``le`` is the local growth rate of the tangent
    sequence over the window; ``lambda_full`` is ``ln|a(N-1)|/N`` for the
    whole run.
    """
    if kernel is None and config.scheme == "fractional":
        kernel = build_kernel(config.q, config.steps)
    traj = simulate(config, kernel, control)
    if not traj.completed:
        return Analysis(traj, None, None, None, NspoResult(False), f"diverged: {traj.reason}")
    start = measurement_start(config, control, transient_cut, settle)
    notes = []
    le = None
    state = lyapunov_exponent(traj, kernel)
    if state.clamped:
        notes.append(f"{state.clamped} singular derivative evaluations clamped")
    if state.truncated_at is not None:
        notes.append(f"tangent overflow at step {state.truncated_at}")
    if start < state.n:
        le = finite_time_exponent(state, start)
    window = traj.samples[start + 1 :]
    K = run_test01(window, test01).K if window.size >= 100 else None
    if K is None:
        notes.append("window too short for the 0-1 test")
    nspo = detect_nspo(traj.samples, tolerance, max_period, tail_points)
    return Analysis(traj, le, state.lambda_, K, nspo, "; ".join(notes))


def _sweep_point(args) -> SweepRow:
    spec, value, kernel = args
    config, control = with_param(spec.config, spec.control, spec.axis, float(value))
    if spec.axis == "q":
        kernel = None
    try:
        result = analyze(
            config,
            control,
            kernel,
            transient_cut=spec.transient_cut,
            settle=spec.settle,
            tail_points=spec.tail_points,
            tolerance=spec.tolerance,
            max_period=spec.max_period,
            test01=spec.test01,
        )
    except (ValueError, FloatingPointError) as exc:
        return SweepRow(float(value), np.empty(0), None, None, False, NspoResult(False), f"failed: {exc}")
    if not result.trajectory.completed:
        return SweepRow(float(value), np.empty(0), None, None, True, result.nspo, result.note)
    tail = result.trajectory.samples[-spec.tail_points :].copy()
    return SweepRow(float(value), tail, result.le, result.K, False, result.nspo, result.note)


def worker_count() -> int:
    env = os.environ.get("FRACDYN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"FRACDYN_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec, workers: int | None = None) -> list[SweepRow]:
    """One row per grid point, in grid order, each from a fresh simulation."""
    for end in (spec.lo, spec.hi):
        with_param(spec.config, spec.control, spec.axis, end)
    kernel = None
    if spec.axis != "q" and spec.config.scheme == "fractional":
        kernel = build_kernel(spec.config.q, spec.config.steps)
    jobs = [(spec, value, kernel) for value in spec.grid()]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) < 2:
        return [_sweep_point(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * workers))))


def classify_window(row: SweepRow | Analysis) -> Window:
    diverged = row.diverged if isinstance(row, SweepRow) else not row.trajectory.completed
    if diverged:
        return Window.DIVERGED
    if row.K is None or row.le is None:
        return Window.INDETERMINATE
    if row.K >= 0.9 and row.le > 0:
        return Window.CHAOTIC
    if abs(row.K) <= 0.1 and row.le <= 0.05:
        return Window.REGULAR
    return Window.INDETERMINATE
