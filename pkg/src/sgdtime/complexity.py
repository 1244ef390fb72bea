"""Closed-form time-to-accuracy formulas for the SGD variants.

Every formula returns seconds under the two-parameter cost model
(h seconds per stochastic gradient, tau seconds per synchronization).
Lower bounds describe the best any step-size tuning of the method can
achieve; upper bounds are what the prescribed schedules guarantee.
Constants are 1 except where an explicit constant is part of the
guarantee (the 64 in the two-step-size nonconvex bound, the 320 in its
convex analogue).

Convex queries target f(x) - f* <= epsilon and carry B2 = ||x0 - x*||^2;
nonconvex queries target ||grad f(x)||^2 <= epsilon and carry
delta = f(x0) - f*.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .schedules import _guarded_ceil

__all__ = [
    "SETTINGS",
    "ComplexityQuery",
    "RegimeRow",
    "local_sgd_lower_convex",
    "local_sgd_lower_nonconvex",
    "minibatch_hero_upper_convex",
    "minibatch_hero_upper_nonconvex",
    "dual_decaying_upper_nonconvex",
    "convex_dual_decaying_upper",
    "async_decaying_upper",
    "heterogeneous_pair",
    "regime_report",
]

SETTINGS = ("convex", "nonconvex", "heterogeneous_nonconvex")


@dataclass(frozen=True)
class ComplexityQuery:
    """One point in problem-parameter space to evaluate the formulas at."""

    setting: str
    tau: float
    h: float
    L: float
    sigma2: float
    epsilon: float
    n: int
    delta: Optional[float] = None  # f(x0) - f*, nonconvex settings only
    B2: Optional[float] = None     # ||x0 - x*||^2, convex setting only

    def __post_init__(self) -> None:
        if self.setting not in SETTINGS:
            raise ValueError(f"setting must be one of {SETTINGS}")
        if self.tau < 0 or self.h < 0:
            raise ValueError("tau and h must be nonnegative")
        if self.L <= 0:
            raise ValueError("L must be positive")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.setting == "convex":
            if self.B2 is None or self.B2 <= 0:
                raise ValueError("convex queries need B2 > 0")
            if self.delta is not None:
                raise ValueError("delta is a nonconvex parameter")
        else:
            if self.delta is None or self.delta < 0:
                raise ValueError("nonconvex queries need delta >= 0")
            if self.B2 is not None:
                raise ValueError("B2 is a convex parameter")

    def _require(self, *settings: str) -> None:
        if self.setting not in settings:
            raise ValueError(f"formula applies to {' / '.join(settings)} "
                             f"queries, got {self.setting!r}")


def _convex_terms(q: ComplexityQuery) -> tuple[float, float]:
    """h * (optimization + averaged noise) and its sequential n=1 variant."""
    opt = q.L * q.B2 / q.epsilon
    noise = q.sigma2 * q.B2 / (q.epsilon * q.epsilon)
    return q.h * (opt + noise / q.n), q.h * (opt + noise)


def _nonconvex_terms(q: ComplexityQuery) -> tuple[float, float]:
    opt = q.L * q.delta / q.epsilon
    noise = q.L * q.sigma2 * q.delta / (q.epsilon * q.epsilon)
    return q.h * (opt + noise / q.n), q.h * (opt + noise)


def local_sgd_lower_convex(q: ComplexityQuery) -> float:
    """Best achievable seconds for single-step-size local SGD, convex.

    min of the parallel expression, which pays
    sqrt(tau h L sigma^2 B^4 / eps^3) for synchronizing, and the
    sequential single-worker fallback.
    """
    q._require("convex")
    parallel, sequential = _convex_terms(q)
    cross = math.sqrt(q.tau * q.h * q.L * q.sigma2 * q.B2 * q.B2
                      / q.epsilon ** 3)
    return min(cross + parallel, sequential)


def local_sgd_lower_nonconvex(q: ComplexityQuery) -> float:
    """Nonconvex analogue; the cross term alone, no sequential min."""
    q._require("nonconvex")
    parallel, _ = _nonconvex_terms(q)
    cross = math.sqrt(q.tau * q.h * q.L ** 2 * q.sigma2 * q.delta ** 2
                      / q.epsilon ** 3)
    return cross + parallel


def minibatch_hero_upper_convex(q: ComplexityQuery) -> float:
    """Guaranteed seconds of the better of minibatch and one-worker SGD."""
    q._require("convex")
    parallel, sequential = _convex_terms(q)
    return min(q.tau * q.L * q.B2 / q.epsilon + parallel, sequential)


def minibatch_hero_upper_nonconvex(q: ComplexityQuery) -> float:
    q._require("nonconvex")
    parallel, sequential = _nonconvex_terms(q)
    return min(q.tau * q.L * q.delta / q.epsilon + parallel, sequential)


def dual_decaying_upper_nonconvex(q: ComplexityQuery) -> tuple[float, float]:
    """Guaranteed seconds of the prescribed two-step-size/decaying runs.

    Returns (explicit, with_hero): the explicit constant-64 expression
    tau 64 L delta / eps + 64 h (L delta / eps + L sigma^2 delta/(n eps^2)),
    and the constants-1 expression including the one-worker fallback,
    which equals minibatch_hero_upper_nonconvex by construction.
    """
    q._require("nonconvex")
    parallel, _ = _nonconvex_terms(q)
    explicit = q.tau * 64.0 * q.L * q.delta / q.epsilon + 64.0 * parallel
    return explicit, minibatch_hero_upper_nonconvex(q)


def convex_dual_decaying_upper(q: ComplexityQuery) -> float:
    """tau 320 L B^2 / eps + 320 h (L B^2 / eps + sigma^2 B^2 / (n eps^2))."""
    q._require("convex")
    parallel, _ = _convex_terms(q)
    return q.tau * 320.0 * q.L * q.B2 / q.epsilon + 320.0 * parallel


def async_decaying_upper(q: ComplexityQuery) -> tuple[float, int]:
    """Guaranteed seconds and gradient budget of the asynchronous variant.

    Returns (seconds, b) with b = max(ceil(sigma^2 / eps), 1); the time
    is the synchronous upper bound with constants one.
    """
    q._require("nonconvex")
    parallel, _ = _nonconvex_terms(q)
    seconds = q.tau * q.L * q.delta / q.epsilon + parallel
    b = max(_guarded_ceil(Fraction(q.sigma2) / Fraction(q.epsilon)), 1)
    return seconds, b


def heterogeneous_pair(q: ComplexityQuery) -> tuple[float, float]:
    """(lower, upper) for the data-heterogeneous nonconvex setting.

    Same shapes as the homogeneous nonconvex bounds, but the upper bound
    has no single-worker fallback: one worker cannot even evaluate the
    other workers' objectives.
    """
    q._require("heterogeneous_nonconvex")
    parallel, _ = _nonconvex_terms(q)
    cross = math.sqrt(q.tau * q.h * q.L ** 2 * q.sigma2 * q.delta ** 2
                      / q.epsilon ** 3)
    lower = cross + parallel
    upper = q.tau * q.L * q.delta / q.epsilon + parallel
    return lower, upper


@dataclass(frozen=True)
class RegimeRow:
    query: ComplexityQuery
    lower_seconds: float
    upper_seconds: float
    ratio: float
    parallel_helps: bool
    already_stationary: bool


def _ratio(lower: float, upper: float) -> float:
    if upper == 0.0:
        return 1.0 if lower == 0.0 else math.inf
    if lower == 0.0:
        return 0.0
    # log space keeps extreme parameter regimes from overflowing
    return math.exp(math.log(lower) - math.log(upper))


def regime_report(queries, threshold: float = 10.0) -> list[RegimeRow]:
    """Lower/upper comparison per query, sorted by ratio, largest first.

    ``parallel_helps`` flags ratios at or above ``threshold``: there the
    prescribed multi-worker schedules provably beat every tuning of the
    single-step-size local method.  Nonconvex queries with
    epsilon >= 2 L delta are flagged already_stationary (the start point
    meets the target, so the comparison is vacuous).
    """
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    rows = []
    for q in queries:
        if q.setting == "heterogeneous_nonconvex":
            lower, upper = heterogeneous_pair(q)
        elif q.setting == "convex":
            lower = local_sgd_lower_convex(q)
            upper = minibatch_hero_upper_convex(q)
        else:
            lower = local_sgd_lower_nonconvex(q)
            upper = minibatch_hero_upper_nonconvex(q)
        stationary = (q.setting != "convex"
                      and q.epsilon >= 2.0 * q.L * q.delta)
        ratio = _ratio(lower, upper)
        rows.append(RegimeRow(q, lower, upper, ratio,
                              ratio >= threshold and not stationary,
                              stationary))
    rows.sort(key=lambda r: r.ratio, reverse=True)
    return rows
