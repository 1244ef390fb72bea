"""Step-size and budget prescriptions for the method runners.

Two closed-form families are covered: fixed local steps scaled by sqrt(n)
against the global step, and per-step decaying schedules driven by a
gradient budget b.  The off-branch helpers carry the distance-indexed step
bound and companion constants used when validating recorded computation
trees.

Ceilings are taken on exact rationals built from the float inputs, with a
1e-12 relative snap toward the nearest integer first, so K and R never pick
up a spurious +1 from decimal inputs like 0.01.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

__all__ = [
    "ScheduleParams",
    "dual_params_nonconvex",
    "decaying_params_nonconvex",
    "dual_params_convex",
    "decaying_params_convex",
    "decaying_step",
    "decaying_steps",
    "offbranch_step_bound",
    "main_branch_gamma_g",
]

_REL_GUARD = Fraction(1, 10 ** 12)


@dataclass(frozen=True)
class ScheduleParams:
    """Bundle of step sizes and budgets one rule prescribes.

    Only the fields a given rule needs are set; the rest stay ``None``.
    ``eta_g`` is ``None`` only for the canonical local rule, whose single
    step size is ``eta_l``.
    """

    eta_g: Optional[float] = None
    eta_l: Optional[float] = None
    b: Optional[float] = None
    K: Optional[int] = None
    R_bound: Optional[int] = None

    def __post_init__(self) -> None:
        if self.eta_g is not None and not self.eta_g > 0:
            raise ValueError("eta_g must be positive")
        if self.eta_l is not None and self.eta_l < 0:
            raise ValueError("eta_l must be nonnegative")
        if self.b is not None and not self.b >= 1:
            raise ValueError("b must be at least 1")
        if self.K is not None and self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.R_bound is not None and self.R_bound < 0:
            raise ValueError("R_bound must be nonnegative")


def _guarded_ceil(q: Fraction) -> int:
    """Ceiling with a relative snap to the nearest integer."""
    nearest = round(q)
    if abs(q - nearest) <= _REL_GUARD * max(1, abs(nearest)):
        return int(nearest)
    return math.ceil(q)


def _check_common(L: float, sigma2: float, n: int, epsilon: float) -> None:
    if not L > 0:
        raise ValueError("L must be positive")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    if n < 1:
        raise ValueError("n must be a positive integer")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")


def dual_params_nonconvex(L: float, sigma2: float, n: int, epsilon: float,
                          delta: float) -> ScheduleParams:
    """Two-step-size rule for smooth nonconvex objectives.

    Returns the maximal allowed local step eta_l = sqrt(n) * eta_g together
    with the round and local-step counts that give the epsilon guarantee.
    """
    _check_common(L, sigma2, n, epsilon)
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    candidates = [1.0 / (4.0 * n * L)]
    if sigma2 > 0:
        candidates.append(epsilon / (8.0 * L * sigma2))
    eta_g = min(candidates)
    K = max(_guarded_ceil(Fraction(sigma2) / (Fraction(epsilon) * n)), 1)
    R = _guarded_ceil(Fraction(32) * Fraction(L) * Fraction(delta) / Fraction(epsilon))
    return ScheduleParams(eta_g=eta_g, eta_l=math.sqrt(n) * eta_g, K=K, R_bound=R)


def decaying_params_nonconvex(L: float, sigma2: float, n: int, epsilon: float,
                              delta: float) -> ScheduleParams:
    """Decaying-local-step rule for smooth nonconvex objectives."""
    base = dual_params_nonconvex(L, sigma2, n, epsilon, delta)
    b = max(sigma2 / epsilon, float(n))
    return ScheduleParams(eta_g=base.eta_g, b=b, K=base.K, R_bound=base.R_bound)


def dual_params_convex(L: float, sigma2: float, n: int, epsilon: float,
                       B: float) -> ScheduleParams:
    """Two-step-size rule for smooth convex objectives."""
    _check_common(L, sigma2, n, epsilon)
    if B < 0:
        raise ValueError("B must be nonnegative")
    candidates = [1.0 / (10.0 * n * L)]
    if sigma2 > 0:
        candidates.append(epsilon / (20.0 * sigma2))
    eta_g = min(candidates)
    K = max(_guarded_ceil(Fraction(sigma2) / (Fraction(epsilon) * n * Fraction(L))), 1)
    R = _guarded_ceil(Fraction(160) * Fraction(L) * Fraction(B) ** 2 / Fraction(epsilon))
    return ScheduleParams(eta_g=eta_g, eta_l=math.sqrt(n) * eta_g, K=K, R_bound=R)


def decaying_params_convex(L: float, sigma2: float, n: int, epsilon: float,
                           B: float) -> ScheduleParams:
    """Decaying-local-step rule for smooth convex objectives."""
    base = dual_params_convex(L, sigma2, n, epsilon, B)
    b = max(sigma2 / (epsilon * L), float(n))
    return ScheduleParams(eta_g=base.eta_g, b=b, K=base.K, R_bound=base.R_bound)


def decaying_step(j: int, params: ScheduleParams) -> float:
    """Local step size for the j-th step under the decaying rule.

    The schedule is sqrt(b / ((j+1) (ln K + 1))) * eta_g for j < K; its
    squares sum to at most eta_g^2 * b over any prefix.
    """
    if params.eta_g is None or params.b is None or params.K is None:
        raise ValueError("decaying rule needs eta_g, b and K")
    if j < 0:
        raise ValueError("j must be nonnegative")
    if j >= params.K:
        raise ValueError(f"j = {j} out of range for K = {params.K} local steps")
    ln_term = math.log(params.K) + 1.0
    return math.sqrt(params.b / ((j + 1) * ln_term)) * params.eta_g


def decaying_steps(params: ScheduleParams) -> np.ndarray:
    """Vectorized :func:`decaying_step` over j = 0..K-1 (bitwise identical)."""
    if params.eta_g is None or params.b is None or params.K is None:
        raise ValueError("decaying rule needs eta_g, b and K")
    ln_term = math.log(params.K) + 1.0
    j_plus_1 = np.arange(1, params.K + 1, dtype=float)
    return np.sqrt(params.b / (j_plus_1 * ln_term)) * params.eta_g


def offbranch_step_bound(j: int, R_bound: int, gamma_g: float) -> float:
    """Largest step allowed at tree distance j from the main branch.

    Off-branch steps may reach sqrt(R / ((j+1) (ln R + 1))) * gamma_g; the
    R = 0 case allows no off-branch movement at all (0 / (ln 0 + 1) reads
    as 0 by convention).
    """
    if not gamma_g > 0:
        raise ValueError("gamma_g must be positive")
    if R_bound < 0:
        raise ValueError("R_bound must be nonnegative")
    if j < 0:
        raise ValueError("j must be nonnegative")
    if j > R_bound:
        raise ValueError(f"j = {j} exceeds R_bound = {R_bound}")
    if R_bound == 0:
        return 0.0
    return math.sqrt(R_bound / ((j + 1) * (math.log(R_bound) + 1.0))) * gamma_g


def main_branch_gamma_g(L: float, R_bound: int, sigma2: float, epsilon: float) -> float:
    """Main-branch step size paired with :func:`offbranch_step_bound`.

    Degenerate terms (R_bound = 0, sigma2 = 0) drop out of the min rather
    than dividing by zero.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    if R_bound < 0:
        raise ValueError("R_bound must be nonnegative")
    if sigma2 < 0:
        raise ValueError("sigma2 must be nonnegative")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    candidates = [1.0 / (2.0 * L)]
    if R_bound > 0:
        candidates.append(1.0 / (4.0 * R_bound * L))
    if sigma2 > 0:
        candidates.append(epsilon / (8.0 * sigma2 * L))
    return min(candidates)
