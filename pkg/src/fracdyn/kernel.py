"""Fractional memory weights for the Caputo delta sum.

The discrete integral of order ``q`` weights the history term at lag ``m``
by ``Gamma(m + q) / Gamma(m + 1)``.  Raw gamma values overflow double
precision past ``m ~ 170``, so the ratio is always formed in the log domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

DEFAULT_CAPACITY = 10_000


def check_order(q: float) -> float:
    """Validate a fractional order ``0 < q <= 1`` and return it as float."""
    q = float(q)
    if not (0.0 < q <= 1.0) or math.isnan(q):
        raise ValueError(f"fractional order q must satisfy 0 < q <= 1, got {q!r}")
    return q


@dataclass(frozen=True, eq=False)
class KernelTable:
    """Immutable table of weights ``Gamma(m+q)/Gamma(m+1)`` for ``m < capacity``.

    ``reversed`` holds the weights in reverse lag order so that the memory sum
    over ``n`` history terms is ``reversed[capacity - n:] @ history[:n]``.
    """

    q: float
    weights: np.ndarray
    gamma_q: float
    reversed: np.ndarray

    @property
    def capacity(self) -> int:
        return int(self.weights.shape[0])


def build_kernel(q: float, n: int = DEFAULT_CAPACITY) -> KernelTable:
    """Build the weight table for order ``q`` and capacity ``n``.

    Each weight is ``exp(lgamma(m + q) - lgamma(m + 1))``; this stays finite
    for every representable lag, unlike the direct ratio.
    """
    q = check_order(q)
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ValueError(f"kernel capacity must be a positive integer, got {n!r}")
    m = np.arange(int(n), dtype=np.float64)
    if q == 1.0:
        weights = np.ones(int(n))
    else:
        weights = np.exp(gammaln(m + q) - gammaln(m + 1.0))
    rev = np.ascontiguousarray(weights[::-1])
    for arr in (weights, rev):
        arr.setflags(write=False)
    return KernelTable(q=q, weights=weights, gamma_q=math.gamma(q), reversed=rev)


def kernel_partial_sum(table: KernelTable, n: int) -> float:
    """Sum of the first ``n`` weights (lags ``0..n-1``)."""
    if int(n) != n or not 1 <= n <= table.capacity:
        raise ValueError(f"n must lie in [1, {table.capacity}], got {n!r}")
    return float(math.fsum(table.weights[: int(n)]))


def partial_sums(table: KernelTable) -> np.ndarray:
    """All partial sums ``S(1..capacity)`` at once."""
    return np.cumsum(table.weights)


def growth_bound_violations(table: KernelTable) -> tuple[int, float]:
    """Check ``|S(n) - n**q / q| <= 1/q`` for every ``n`` in the table.

    Returns the number of violations and the worst ``|S(n) - n**q/q| * q``
    (which must stay at or below 1).
    """
    q = table.q
    n = np.arange(1, table.capacity + 1, dtype=np.float64)
    deviation = np.abs(partial_sums(table) - n**q / q)
    return int(np.count_nonzero(deviation > 1.0 / q)), float(deviation.max() * q)
