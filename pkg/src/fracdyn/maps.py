"""One-dimensional maps with closed-form value and derivative.

Two families ship with the package:

* ``GOMPERTZ``: ``f(x) = 6.75 r (x**p - x)``, unimodal on ``[0, 1]`` with its
  maximum at ``x = (p)**(1/(1-p))`` (``8/27`` for the canonical ``p = 2/3``).
* ``LOGISTIC``: ``f(x) = r x (1 - x)``.

A family is a value function, a derivative and a domain predicate; new
families are added by registering a :class:`MapDef`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

GOMPERTZ_SCALE = 6.75
CANONICAL_P = 2.0 / 3.0


class Family(str, enum.Enum):
    GOMPERTZ = "gompertz"
    LOGISTIC = "logistic"


class MapDomainError(ValueError):
    """State outside the domain where the map is defined."""


@dataclass(frozen=True)
class MapSpec:
    family: Family = Family.GOMPERTZ
    r: float = 1.0
    p: float | None = None

    def __post_init__(self) -> None:
        family = Family(self.family)
        if self.p is None:
            p = CANONICAL_P if family is Family.GOMPERTZ else 1.0
        else:
            p = float(self.p)
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "p", p)
        _CATALOG[self.family].check(self)

    def __call__(self, x):
        return map_eval(self, x)


@dataclass(frozen=True)
class MapDef:
    value: Callable[[MapSpec, float], float]
    derivative: Callable[[MapSpec, float], float]
    in_domain: Callable[[float], bool]
    check: Callable[[MapSpec], None]


def _gompertz_value(spec: MapSpec, x):
    return GOMPERTZ_SCALE * spec.r * (np.power(x, spec.p) - x)


def _gompertz_derivative(spec: MapSpec, x):
    return GOMPERTZ_SCALE * spec.r * (spec.p * np.power(x, spec.p - 1.0) - 1.0)


def _gompertz_check(spec: MapSpec) -> None:
    if not 0.0 <= spec.r <= 1.0:
        raise ValueError(f"gompertz r must lie in [0, 1], got {spec.r}")
    if not (0.66 <= spec.p <= 0.765 or spec.p == CANONICAL_P):
        raise ValueError(f"gompertz p must lie in [0.66, 0.765], got {spec.p}")


def _logistic_check(spec: MapSpec) -> None:
    if not 0.0 <= spec.r <= 4.0:
        raise ValueError(f"logistic r must lie in [0, 4], got {spec.r}")
    if spec.p != 1.0:
        raise ValueError("logistic map has no power exponent (p is fixed at 1)")


_CATALOG: dict[Family, MapDef] = {
    Family.GOMPERTZ: MapDef(
        value=_gompertz_value,
        derivative=_gompertz_derivative,
        in_domain=lambda x: x >= 0.0,
        check=_gompertz_check,
    ),
    Family.LOGISTIC: MapDef(
        value=lambda spec, x: spec.r * x * (1.0 - x),
        derivative=lambda spec, x: spec.r * (1.0 - 2.0 * np.asarray(x)),
        in_domain=lambda x: True,
        check=_logistic_check,
    ),
}


def register(family: Family, definition: MapDef) -> None:
    _CATALOG[family] = definition


def in_domain(spec: MapSpec, x: float) -> bool:
    return bool(_CATALOG[spec.family].in_domain(x))


def map_eval(spec: MapSpec, x):
    """Evaluate the map at ``x`` (scalar or array).

    Raises :class:`MapDomainError` for negative states of the Gompertz family,
    where ``x**p`` has no real value.
    """
    if spec.family is Family.GOMPERTZ and np.any(np.asarray(x) < 0.0):
        raise MapDomainError(f"gompertz map undefined for x < 0 (x={x})")
    out = _CATALOG[spec.family].value(spec, x)
    return float(out) if np.ndim(out) == 0 else out


def map_derivative(spec: MapSpec, x):
    """Derivative ``f'(x)``; the Gompertz family is singular at ``x <= 0``."""
    if spec.family is Family.GOMPERTZ and np.any(np.asarray(x) <= 0.0):
        raise MapDomainError(f"gompertz derivative singular for x <= 0 (x={x})")
    out = _CATALOG[spec.family].derivative(spec, x)
    return float(out) if np.ndim(out) == 0 else out


def critical_point(spec: MapSpec) -> float:
    """Location of the interior maximum of the map on ``[0, 1]``."""
    if spec.family is Family.GOMPERTZ:
        return spec.p ** (1.0 / (1.0 - spec.p))
    return 0.5
