"""Finite-time Lyapunov exponent from the linearized memory recurrence.

Differentiating the discrete integral with respect to ``x(0)`` gives the
tangent sequence

    a(n) = 1 + 1/Gamma(q) * sum_{j=1..n} w[n-j] * a(j-1) * f'(x(j-1)),   a(0) = 1

and the exponent estimate ``lambda = ln|a(n-1)| / n``.  A multiplicative
impulse at step ``n`` scales ``a(n+1)`` by ``1 + gamma``; an additive one
leaves it unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernel import KernelTable, build_kernel
from .maps import Family, _CATALOG
from .simulator import ControlMode, Trajectory

SINGULARITY_FLOOR = 1e-12
DEFAULT_ENVELOPE = 32


class TrajectoryDivergedError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TangentState:
    a: np.ndarray
    log_abs_a: np.ndarray
    lambda_: float
    clamped: int = 0
    truncated_at: int | None = None

    @property
    def n(self) -> int:
        return len(self.a) - 1

    def running_lambda(self) -> np.ndarray:
        """``ln|a(n-1)| / n`` for ``n = 1..len(a)-1``."""
        n = np.arange(1, len(self.a))
        return self.log_abs_a[:-1] / n


def exponent_from_logs(log_abs_a: np.ndarray) -> float:
    n = len(log_abs_a) - 1
    if n < 1:
        raise ValueError("need at least two tangent values")
    return float(log_abs_a[n - 1] / n)


def tangent_recurrence(
    factors: np.ndarray,
    weights: np.ndarray,
    gamma_q: float = 1.0,
    gains: np.ndarray | None = None,
) -> np.ndarray:
    """Solve ``a(n) = g(n) * (1 + sum_{j<=n} w[n-j] a(j-1) d(j-1) / gamma_q)``, ``a(0) = 1``.

    ``factors`` are the derivative values ``d`` and ``gains`` optional
    per-step multipliers ``g`` (impulse factors).  Stops at the first
    non-finite value and returns the finite prefix.
    """
    n_steps = len(factors)
    rev = np.ascontiguousarray(weights[:n_steps][::-1])
    a = np.empty(n_steps + 1)
    a[0] = 1.0
    weighted = np.empty(n_steps)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_steps + 1):
            weighted[n - 1] = a[n - 1] * factors[n - 1]
            value = 1.0 + float(rev[n_steps - n :] @ weighted[:n]) / gamma_q
            if gains is not None:
                value *= gains[n - 1]
            if not math.isfinite(value):
                return a[:n]
            a[n] = value
    return a


def _derivative_factors(trajectory: Trajectory, derivative_at: str) -> tuple[np.ndarray, int]:
    config = trajectory.config
    x = trajectory.samples
    if derivative_at == "previous":
        args = x[:-1]
    elif derivative_at == "current":
        args = x[1:]
    else:
        raise ValueError("derivative_at must be 'previous' or 'current'")
    clamped = 0
    if config.map.family is Family.GOMPERTZ:
        low = args < SINGULARITY_FLOOR
        clamped = int(np.count_nonzero(low))
        args = np.where(low, SINGULARITY_FLOOR, args)
    return np.asarray(_CATALOG[config.map.family].derivative(config.map, args), dtype=float), clamped


def _impulse_gains(trajectory: Trajectory) -> np.ndarray | None:
    control = trajectory.control
    if control.mode is not ControlMode.MULTIPLICATIVE or not trajectory.control_events:
        return None
    gains = np.ones(trajectory.n_end)
    for n in trajectory.control_events:
        gains[n] = 1.0 + control.gamma
    return gains


def lyapunov_exponent(
    trajectory: Trajectory,
    kernel: KernelTable | None = None,
    derivative_at: str = "previous",
) -> TangentState:
    """Tangent sequence and exponent along a completed trajectory.

    ``derivative_at="previous"`` evaluates ``f'`` at ``x(j-1)``, the argument
    of ``f`` in the integrated sum; ``"current"`` uses ``x(j)`` instead.
    Gompertz states below ``1e-12`` are clamped before evaluating ``f'``;
    the number of clamps is reported in ``TangentState.clamped``.
    """
    if not trajectory.completed:
        raise TrajectoryDivergedError(
            f"trajectory diverged at step {trajectory.diverged_at}: {trajectory.reason}"
        )
    if trajectory.n_end < 2:
        raise ValueError("trajectory too short for an exponent estimate")
    config = trajectory.config
    factors, clamped = _derivative_factors(trajectory, derivative_at)
    gains = _impulse_gains(trajectory)

    if config.scheme == "map":
        steps = factors if gains is None else factors * gains
        with np.errstate(divide="ignore"):
            logs = np.concatenate(([0.0], np.cumsum(np.log(np.maximum(np.abs(steps), 1e-300)))))
        signs = np.concatenate(([1.0], np.cumprod(np.sign(steps))))
        with np.errstate(over="ignore"):
            a = signs * np.exp(logs)
        return TangentState(a, logs, exponent_from_logs(logs), clamped)

    if kernel is None:
        kernel = build_kernel(config.q, trajectory.n_end)
    elif kernel.q != config.q or kernel.capacity < trajectory.n_end:
        raise ValueError("kernel does not match the trajectory's order or length")
    a = tangent_recurrence(factors, kernel.weights, kernel.gamma_q, gains)
    truncated = None if len(a) == trajectory.n_end + 1 else len(a)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(a))
    logs = np.maximum(logs, math.log(1e-300))
    return TangentState(a, logs, exponent_from_logs(logs), clamped, truncated)


def finite_time_exponent(
    state: TangentState,
    start: int,
    stop: int | None = None,
    envelope: int = DEFAULT_ENVELOPE,
) -> float:
    """Growth rate of ``|a|`` between steps ``start`` and ``stop``.

    The tangent sequence changes sign and passes near zero, so each end point
    uses the running maximum of ``ln|a|`` over the preceding ``envelope``
    steps.  Used for the local exponent over a window, e.g. after control
    is switched on.
    """
    last = len(state.log_abs_a) - 1
    stop = last if stop is None else min(stop, last)
    if not 0 <= start < stop:
        raise ValueError(f"need 0 <= start < stop, got start={start}, stop={stop}")

    def level(k: int) -> float:
        return float(state.log_abs_a[max(0, k - envelope + 1) : k + 1].max())

    return (level(stop) - level(start)) / (stop - start)
