"""Simulated wall-clock accounting for gradient and synchronization costs.

One stochastic gradient costs h seconds; one synchronization costs tau
seconds.  Workers compute in parallel, so a synchronous round with K local
steps costs tau + K * h regardless of worker count.  The asynchronous
round ends when its gradient budget is exhausted; per-worker speed factors
scale the gradient cost as h / speed.

Per-round completion times are computed as (t + 1) * round_time rather
than by accumulation, so the final time of an R-round synchronous run
equals R * (tau + K * h) to machine precision.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Optional, Sequence

__all__ = [
    "TimeModel",
    "sync_round_time",
    "hero_total_time",
    "async_round_time",
    "async_completion_schedule",
    "charge",
]


@dataclass(frozen=True)
class TimeModel:
    """Seconds per stochastic gradient (h) and per synchronization (tau)."""

    h_seconds: float
    tau_seconds: float

    def __post_init__(self) -> None:
        if self.h_seconds < 0:
            raise ValueError("h_seconds must be nonnegative")
        if self.tau_seconds < 0:
            raise ValueError("tau_seconds must be nonnegative")


def sync_round_time(tm: TimeModel, K: int) -> float:
    """Duration of one synchronous round with K local steps per worker."""
    if K < 1:
        raise ValueError("K must be a positive integer")
    return tm.tau_seconds + K * tm.h_seconds


def hero_total_time(tm: TimeModel, R: int) -> float:
    """Total duration of R single-worker rounds (no synchronization)."""
    if R < 0:
        raise ValueError("R must be nonnegative")
    return R * tm.h_seconds


def _check_speeds(speeds: Optional[Sequence[float]], n: int) -> tuple[float, ...]:
    if speeds is None:
        return (1.0,) * n
    out = tuple(float(s) for s in speeds)
    if len(out) != n:
        raise ValueError(f"need {n} speeds, got {len(out)}")
    if any(not s > 0 for s in out):
        raise ValueError("speeds must be positive")
    return out


def async_completion_schedule(tm: TimeModel, speeds: Optional[Sequence[float]],
                              b: int, n: int
                              ) -> tuple[list[int], list[tuple[int, int]], float]:
    """Completion order of the first b gradients across n workers.

    Worker i's m-th gradient finishes at (m + 1) * (h / speed_i) virtual
    seconds.  Simultaneous completions are won by the lowest worker index.
    Returns (per-worker counts, completion order as (worker, step) pairs,
    time of the b-th completion).
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    if b < 1:
        raise ValueError("budget b must be a positive integer")
    spd = _check_speeds(speeds, n)
    per_step = [tm.h_seconds / s for s in spd]
    counts = [0] * n
    order: list[tuple[int, int]] = []
    heap = [(per_step[i], i, 0) for i in range(n)]
    heapq.heapify(heap)
    finish = 0.0
    for _ in range(b):
        t, i, m = heapq.heappop(heap)
        order.append((i, m))
        counts[i] = m + 1
        finish = t
        heapq.heappush(heap, ((m + 2) * per_step[i], i, m + 1))
    return counts, order, finish


def async_round_time(tm: TimeModel, speeds: Optional[Sequence[float]],
                     b: int, n: int) -> float:
    """Duration of one asynchronous round with gradient budget b."""
    _, _, finish = async_completion_schedule(tm, speeds, b, n)
    return tm.tau_seconds + finish


def charge(trace: list, tm: TimeModel, config) -> list:
    """Return trace rows with ``sim_time_s`` recomputed from the time model.

    Row t carries the cumulative time after round t completes.  The
    function is idempotent: charging an already charged trace gives the
    same result.
    """
    if not trace:
        return []
    variant = config.variant
    if variant == "hero_sgd":
        round_time = tm.h_seconds
    elif variant == "decaying_async":
        round_time = async_round_time(tm, config.async_worker_speeds,
                                      config.async_budget_b, config.n)
    else:
        round_time = sync_round_time(tm, config.K)
    out = []
    for row in trace:
        # an R = 0 run keeps its single x0 row at time zero
        elapsed = 0.0 if row.local_steps_executed == () else (row.round + 1) * round_time
        out.append(replace(row, sim_time_s=elapsed))
    return out
