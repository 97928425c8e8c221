"""0-1 test for chaos on a scalar time series.

The series ``phi(1..N)`` drives the translation variables

    p(n) = sum_{j<=n} phi(j) cos(j c),   q(n) = sum_{j<=n} phi(j) sin(j c)

whose mean-square displacement ``M(n)`` stays bounded for regular motion and
grows linearly for chaotic motion.  ``K`` is the growth rate of ``M``,
computed for many ``c`` and aggregated by the median.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

C_LOW = math.pi / 5
C_HIGH = 4 * math.pi / 5
MIN_SERIES = 100
MIN_CURVE = 10
EPS = 1e-12


class Estimator(str, enum.Enum):
    REGRESSION = "regression"
    CORRELATION = "correlation"


@dataclass(frozen=True)
class Test01Config:
    """Settings for :func:`run_test01`.

    ``n_cut=None`` means ``N // 10``.  ``demean`` subtracts the series mean
    before forming ``p`` and ``q``, which removes the bounded oscillatory
    term ``mean(phi)**2 (1 - cos nc)/(1 - cos c)`` from ``M``.
    """

    __test__ = False  # not a pytest class despite the name

    c_count: int = 100
    c_values: tuple[float, ...] | None = None
    n_cut: int | None = None
    estimator: Estimator = Estimator.CORRELATION
    demean: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        if self.c_count < 1:
            raise ValueError("c_count must be positive")
        for c in self.c_values or ():
            if not C_LOW <= c <= C_HIGH:
                raise ValueError(f"c={c} outside [pi/5, 4pi/5]")

    def grid(self) -> np.ndarray:
        if self.c_values is not None:
            return np.asarray(self.c_values, dtype=float)
        return np.linspace(C_LOW, C_HIGH, self.c_count)


@dataclass(frozen=True, eq=False)
class Test01Result:
    __test__ = False

    K: float
    per_c_K: np.ndarray
    c_values: np.ndarray
    diagnostic_c: float
    pq_path: tuple[np.ndarray, np.ndarray]
    M_curve: np.ndarray
    degenerate: bool = False
    notes: tuple[str, ...] = field(default=())


def translation_variables(series, c: float) -> tuple[np.ndarray, np.ndarray]:
    phi = np.asarray(series, dtype=float)
    if phi.ndim != 1 or phi.size == 0:
        raise ValueError("series must be a nonempty 1-d sequence")
    if not 0.0 < c < 2 * math.pi:
        raise ValueError("c must lie in (0, 2pi)")
    j = np.arange(1, phi.size + 1)
    return np.cumsum(phi * np.cos(j * c)), np.cumsum(phi * np.sin(j * c))


def _msd_rows(z: np.ndarray, n_cut: int) -> np.ndarray:
    """Mean-square displacement for each row of the complex paths ``z``."""
    length = z.shape[-1]
    out = np.empty(z.shape[:-1] + (n_cut,))
    for n in range(1, n_cut + 1):
        d = z[..., n:] - z[..., : length - n]
        out[..., n - 1] = np.mean(d.real**2 + d.imag**2, axis=-1)
    return out


def mean_square_displacement(p, q, n_cut: int) -> np.ndarray:
    """``M(n) = 1/(N-n) sum_{j<=N-n} (p(j+n)-p(j))**2 + (q(j+n)-q(j))**2`` for ``n = 1..n_cut``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ValueError("p and q must be 1-d sequences of equal length")
    if not 1 <= n_cut < p.size:
        raise ValueError(f"n_cut must lie in [1, {p.size - 1}], got {n_cut}")
    return _msd_rows(p + 1j * q, int(n_cut))


def _slope(M: np.ndarray) -> tuple[float, bool]:
    n = np.arange(1, M.size + 1, dtype=float)
    keep = M > EPS
    if np.count_nonzero(keep) < 2:
        return 0.0, True
    x = np.log(n[keep])
    y = np.log(M[keep])
    x = x - x.mean()
    return float(x @ (y - y.mean()) / (x @ x)), False


def _correlation(M: np.ndarray) -> tuple[float, bool]:
    n = np.arange(1, M.size + 1, dtype=float)
    dm = M - M.mean()
    spread = math.sqrt(float(dm @ dm))
    if spread <= EPS * max(1.0, float(np.abs(M).max())):
        return 0.0, True
    dn = n - n.mean()
    return float(dn @ dm / (math.sqrt(float(dn @ dn)) * spread)), False


def growth_rate(M, estimator: Estimator | str = Estimator.REGRESSION) -> float:
    """Asymptotic growth rate of ``M``.

    ``regression``: least-squares slope of ``log M(n)`` on ``log n`` over the
    points with ``M(n) > 1e-12``.  ``correlation``: correlation coefficient of
    ``M(n)`` with ``n``.  An all-zero curve returns 0.
    """
    M = np.asarray(M, dtype=float)
    if M.size < MIN_CURVE:
        raise ValueError(f"need at least {MIN_CURVE} points of M")
    if Estimator(estimator) is Estimator.REGRESSION:
        return _slope(M)[0]
    return _correlation(M)[0]


def run_test01(series, config: Test01Config = Test01Config()) -> Test01Result:
    phi = np.asarray(series, dtype=float)
    if phi.ndim != 1 or phi.size < MIN_SERIES:
        raise ValueError(f"series needs at least {MIN_SERIES} samples, got {phi.size}")
    if not np.all(np.isfinite(phi)):
        raise ValueError("series contains non-finite values")
    N = phi.size
    n_cut = N // 10 if config.n_cut is None else int(config.n_cut)
    if not MIN_CURVE <= n_cut <= N // 10:
        raise ValueError(f"n_cut must lie in [{MIN_CURVE}, N/10 = {N // 10}], got {n_cut}")
    if config.demean:
        phi = phi - phi.mean()

    cs = config.grid()
    j = np.arange(1, N + 1)
    z = np.cumsum(phi * np.exp(1j * np.outer(cs, j)), axis=1)
    M = _msd_rows(z, n_cut)

    rate = _slope if config.estimator is Estimator.REGRESSION else _correlation
    per_c = np.empty(cs.size)
    degenerate = np.zeros(cs.size, dtype=bool)
    for i in range(cs.size):
        per_c[i], degenerate[i] = rate(M[i])
    K = float(np.median(per_c))
    # the diagnostic c is the one carrying the (lower) median K
    pick = int(np.argsort(per_c, kind="stable")[(cs.size - 1) // 2])
    notes = ("M vanishes for every c; K set to 0",) if degenerate.all() else ()
    return Test01Result(
        K=K,
        per_c_K=per_c,
        c_values=cs,
        diagnostic_c=float(cs[pick]),
        pq_path=(z[pick].real.copy(), z[pick].imag.copy()),
        M_curve=M[pick].copy(),
        degenerate=bool(degenerate.all()),
        notes=notes,
    )


def discard_transient(samples, fraction: float) -> np.ndarray:
    """Drop the leading ``fraction`` of samples."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError("transient fraction must lie in [0, 1)")
    samples = np.asarray(samples, dtype=float)
    return samples[int(fraction * samples.size) :]
