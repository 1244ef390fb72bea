"""The six SGD variants, sharing one aggregation engine.

Synchronous variants run R rounds; in each round every worker takes K
local steps from the shared iterate and the server applies all n*K
sampled gradients to the shared iterate with the global step size:

    x^{t+1} = x^t - eta_g * sum_{i,j} g_{i,j}

Gradients enter the sum in worker-major, step-minor order (the
asynchronous variant uses virtual-completion-time order instead), so
runs are bit-reproducible for a fixed seed.  Variants differ only in
how the local and global step sizes are derived:

- local_sgd:           local steps eta_l, aggregation eta_l / n
- minibatch_sgd:       no local movement, aggregation eta_g
- hero_sgd:            single worker, one step per round, eta_g
- dual_local_sgd:      local steps eta_l, aggregation eta_g
- decaying_local_sgd:  local step j decays as sqrt(b / ((j+1)(ln K + 1)))
- decaying_async:  round ends after b completed gradients; a worker's
                       m-th step decays as sqrt((b-1) / ((m+1)(ln(b-1)+1)))

Round t's trace row reports the gradient norm and suboptimality at x^t
(before the round's work) and the simulated time after the round ends.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import timemodel
from .ctree import ComputationTree
from .problems import STEP_CAP, ProblemSpec, StreamPool
from .schedules import ScheduleParams, offbranch_step_bound, decaying_steps
from .timemodel import TimeModel

__all__ = [
    "VARIANTS",
    "ConfigError",
    "MethodConfig",
    "RoundTrace",
    "RunResult",
    "validate_config",
    "run",
    "run_local_sgd",
    "run_minibatch_sgd",
    "run_hero_sgd",
    "run_dual_local_sgd",
    "run_decaying_local_sgd",
    "run_decaying_async",
    "traces_to_csv",
    "traces_to_json",
    "config_to_dict",
    "config_from_dict",
]

VARIANTS = ("local_sgd", "minibatch_sgd", "hero_sgd", "dual_local_sgd",
            "decaying_local_sgd", "decaying_async")


class ConfigError(ValueError):
    """A run configuration is inconsistent with the problem or variant."""


@dataclass(frozen=True)
class MethodConfig:
    variant: str
    n: int
    K: int
    R: int
    schedule: ScheduleParams
    seed: int = 0
    record_tree: bool = False
    async_budget_b: Optional[int] = None
    async_worker_speeds: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class RoundTrace:
    round: int
    grad_norm_sq_at_xt: float
    f_gap: float
    sim_time_s: float
    local_steps_executed: tuple[int, ...]


@dataclass(frozen=True)
class RunResult:
    traces: list[RoundTrace]
    final_point: np.ndarray
    config: MethodConfig
    tree: Optional[ComputationTree] = None


def _positive_int(value, name: str) -> None:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value!r}")


def validate_config(spec: ProblemSpec, config: MethodConfig) -> None:
    """Raise ConfigError if the run cannot be executed as specified."""
    if config.variant not in VARIANTS:
        raise ConfigError(f"unknown variant {config.variant!r}; "
                          f"expected one of {', '.join(VARIANTS)}")
    _positive_int(config.n, "n")
    _positive_int(config.K, "K")
    if not isinstance(config.R, int) or isinstance(config.R, bool) or config.R < 0:
        raise ConfigError(f"R must be a nonnegative integer, got {config.R!r}")
    if not isinstance(config.seed, int) or config.seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {config.seed!r}")
    if config.n != spec.workers_n:
        raise ConfigError(f"config.n = {config.n} but the problem defines "
                          f"{spec.workers_n} worker oracles")
    if config.K >= STEP_CAP:
        raise ConfigError(f"K must be below {STEP_CAP}")
    if not isinstance(config.schedule, ScheduleParams):
        raise ConfigError("schedule must be a ScheduleParams")

    s = config.schedule
    if s.K is not None and s.K != config.K:
        raise ConfigError(f"schedule.K = {s.K} conflicts with config.K = {config.K}")

    if config.variant == "decaying_async":
        if config.async_budget_b is None:
            raise ConfigError("decaying_async needs async_budget_b")
        _positive_int(config.async_budget_b, "async_budget_b")
        if config.async_worker_speeds is not None:
            speeds = config.async_worker_speeds
            if len(speeds) != config.n:
                raise ConfigError(f"need {config.n} worker speeds, "
                                  f"got {len(speeds)}")
            if any(not sp > 0 for sp in speeds):
                raise ConfigError("worker speeds must be positive")
        if s.b is not None and s.b != config.async_budget_b:
            raise ConfigError(f"schedule.b = {s.b} conflicts with "
                              f"async_budget_b = {config.async_budget_b}")
    else:
        if config.async_budget_b is not None or config.async_worker_speeds is not None:
            raise ConfigError("async_budget_b / async_worker_speeds are only "
                              "valid for decaying_async")

    variant = config.variant
    if variant == "local_sgd":
        if s.eta_l is None:
            raise ConfigError("local_sgd needs schedule.eta_l")
        if s.eta_g is not None and s.eta_g != s.eta_l / config.n:
            raise ConfigError("local_sgd aggregates with eta_l / n; leave "
                              "eta_g unset or equal to that")
    elif variant in ("minibatch_sgd", "hero_sgd"):
        if s.eta_g is None:
            raise ConfigError(f"{variant} needs schedule.eta_g")
        if s.eta_l not in (None, 0.0):
            raise ConfigError(f"{variant} takes no local steps; eta_l must "
                              "be unset or 0")
        if variant == "hero_sgd" and config.K != 1:
            raise ConfigError("hero_sgd runs one step per round; set K = 1")
    elif variant == "dual_local_sgd":
        if s.eta_g is None or s.eta_l is None:
            raise ConfigError("dual_local_sgd needs schedule.eta_g and eta_l")
    elif variant == "decaying_local_sgd":
        if s.eta_g is None or s.b is None:
            raise ConfigError("decaying_local_sgd needs schedule.eta_g and b")
        if s.eta_l is not None:
            raise ConfigError("decaying_local_sgd derives its local steps; "
                              "leave eta_l unset")
    elif variant == "decaying_async":
        if s.eta_g is None:
            raise ConfigError("decaying_async needs schedule.eta_g")
        if s.eta_l is not None:
            raise ConfigError("decaying_async derives its local steps; "
                              "leave eta_l unset")


# -- tree recording -------------------------------------------------------


def _draw_key(round_index: int, worker: int, step: int, n: int) -> int:
    """Globally unique id for the step-th draw of (worker, round)."""
    return (round_index * n + worker) * STEP_CAP + step


def _record_round(tree: ComputationTree, anchor: int, round_index: int,
                  n: int, local_etas, counts, order, eta_g: float) -> int:
    """Append one round below the main-branch node ``anchor``.

    ``local_etas[m]`` is the step size of any worker's m-th local step;
    ``counts[i]`` how many steps worker i took; ``order`` the (worker,
    step) pairs in aggregation order.  When no local step moves (all
    step sizes zero), workers never leave the anchor, so no local nodes
    are recorded and every gradient is taken at the anchor itself.
    Returns the node id of the new aggregated iterate.
    """
    if max(counts, default=0) > STEP_CAP:
        raise ConfigError("cannot record a tree with more than "
                          f"{STEP_CAP} steps per worker per round")
    zero_local = not any(local_etas[m] != 0.0
                         for i in range(n) for m in range(counts[i]))
    grad_nodes: list[list[int]] = []
    for i in range(n):
        if zero_local:
            grad_nodes.append([anchor] * counts[i])
            continue
        chain = []
        prev = anchor
        for m in range(counts[i]):
            chain.append(prev)
            prev = tree.record_step(prev, prev, local_etas[m],
                                    _draw_key(round_index, i, m, n))
        grad_nodes.append(chain)
    tip = tree.main_branch()[-1]
    for i, m in order:
        tip = tree.record_step(tip, grad_nodes[i][m], eta_g,
                               _draw_key(round_index, i, m, n), main=True)
    return tip


# -- engines --------------------------------------------------------------


def _metrics(spec: ProblemSpec, x: np.ndarray) -> tuple[float, float]:
    g = spec.grad(x)
    return float(g @ g), spec.f_gap(x)


def _x0_trace(spec: ProblemSpec, x: np.ndarray) -> list[RoundTrace]:
    gsq, fgap = _metrics(spec, x)
    return [RoundTrace(0, gsq, fgap, 0.0, ())]


def _run_sync(spec: ProblemSpec, config: MethodConfig, tm: TimeModel,
              eta_g: float, local_etas: np.ndarray,
              n_workers: int) -> RunResult:
    K, R = config.K, config.R
    d = spec.dimension
    model = spec.model
    pool = StreamPool()
    workers = np.arange(n_workers)
    x = np.array(spec.start_point, dtype=float)
    tree = ComputationTree() if config.record_tree else None
    anchor = tree.root_id if tree is not None else 0
    order = [(i, j) for i in range(n_workers) for j in range(K)]
    traces = []
    for t in range(R):
        gsq, fgap = _metrics(spec, x)
        draws = np.stack([model.draw_block(pool.generator(config.seed, i, t), K)
                          for i in range(n_workers)])
        Z = np.repeat(x[None, :], n_workers, axis=0)
        G = np.empty((n_workers, K, d))
        for j in range(K):
            gj = model.stoch_rows(Z, draws[:, j], workers)
            G[:, j] = gj
            eta = local_etas[j]
            if eta != 0.0:
                Z = Z - eta * gj
        # worker-major, step-minor stacking; np.sum is pairwise and
        # deterministic for a fixed shape
        S = G.reshape(n_workers * K, d).sum(axis=0)
        if tree is not None:
            anchor = _record_round(tree, anchor, t, n_workers, local_etas,
                                   [K] * n_workers, order, eta_g)
        x = x - eta_g * S
        traces.append(RoundTrace(t, gsq, fgap, 0.0, (K,) * n_workers))
    if R == 0:
        traces = _x0_trace(spec, x)
    traces = timemodel.charge(traces, tm, config)
    return RunResult(traces, x, config, tree)


def _run_async(spec: ProblemSpec, config: MethodConfig,
               tm: TimeModel) -> RunResult:
    n, R = config.n, config.R
    b = config.async_budget_b
    eta_g = config.schedule.eta_g
    counts, order, _ = timemodel.async_completion_schedule(
        tm, config.async_worker_speeds, b, n)
    max_steps = max(counts)
    # a worker's m-th local step; zero when the budget is a single gradient
    local_etas = np.array([offbranch_step_bound(m, b - 1, eta_g)
                           for m in range(max_steps)])
    d = spec.dimension
    model = spec.model
    pool = StreamPool()
    x = np.array(spec.start_point, dtype=float)
    tree = ComputationTree() if config.record_tree else None
    anchor = tree.root_id if tree is not None else 0
    traces = []
    for t in range(R):
        gsq, fgap = _metrics(spec, x)
        G: list[list[np.ndarray]] = []
        for i in range(n):
            draws = model.draw_block(pool.generator(config.seed, i, t),
                                     counts[i])
            z = x[None, :]
            rows = []
            sel = np.array([i])
            for m in range(counts[i]):
                g = model.stoch_rows(z, draws[m:m + 1], sel)
                rows.append(g[0])
                eta = local_etas[m]
                if eta != 0.0:
                    z = z - eta * g
            G.append(rows)
        # gradients enter the sum in virtual-completion-time order
        S = np.stack([G[i][m] for i, m in order]).sum(axis=0)
        if tree is not None:
            anchor = _record_round(tree, anchor, t, n, local_etas,
                                   counts, order, eta_g)
        x = x - eta_g * S
        traces.append(RoundTrace(t, gsq, fgap, 0.0, tuple(counts)))
    if R == 0:
        traces = _x0_trace(spec, x)
    traces = timemodel.charge(traces, tm, config)
    return RunResult(traces, x, config, tree)


def run(spec: ProblemSpec, config: MethodConfig,
        time_model: Optional[TimeModel] = None) -> RunResult:
    """Validate the configuration and execute the requested variant."""
    tm = time_model if time_model is not None else TimeModel(1.0, 1.0)
    validate_config(spec, config)
    s = config.schedule
    variant = config.variant
    K = config.K
    if variant == "local_sgd":
        return _run_sync(spec, config, tm, s.eta_l / config.n,
                         np.full(K, s.eta_l), config.n)
    if variant == "minibatch_sgd":
        return _run_sync(spec, config, tm, s.eta_g, np.zeros(K), config.n)
    if variant == "hero_sgd":
        return _run_sync(spec, config, tm, s.eta_g, np.zeros(1), 1)
    if variant == "dual_local_sgd":
        return _run_sync(spec, config, tm, s.eta_g,
                         np.full(K, s.eta_l), config.n)
    if variant == "decaying_local_sgd":
        params = s if s.K is not None else replace(s, K=K)
        return _run_sync(spec, config, tm, s.eta_g,
                         decaying_steps(params), config.n)
    return _run_async(spec, config, tm)


def _wrap(variant: str):
    def runner(spec: ProblemSpec, config: MethodConfig,
               time_model: Optional[TimeModel] = None) -> RunResult:
        if config.variant != variant:
            raise ConfigError(f"config.variant is {config.variant!r}, "
                              f"expected {variant!r}")
        return run(spec, config, time_model)
    runner.__name__ = f"run_{variant}"
    return runner


run_local_sgd = _wrap("local_sgd")
run_minibatch_sgd = _wrap("minibatch_sgd")
run_hero_sgd = _wrap("hero_sgd")
run_dual_local_sgd = _wrap("dual_local_sgd")
run_decaying_local_sgd = _wrap("decaying_local_sgd")
run_decaying_async = _wrap("decaying_async")


# -- serialization --------------------------------------------------------


def traces_to_csv(traces: list[RoundTrace]) -> str:
    """CSV with columns round, grad_norm_sq, f_gap, sim_time_s, m_1..m_n."""
    n = max((len(row.local_steps_executed) for row in traces), default=0)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["round", "grad_norm_sq", "f_gap", "sim_time_s"]
                    + [f"m_{i + 1}" for i in range(n)])
    for row in traces:
        counts = list(row.local_steps_executed)
        counts += [0] * (n - len(counts))
        writer.writerow([row.round, repr(row.grad_norm_sq_at_xt),
                         repr(row.f_gap), repr(row.sim_time_s)] + counts)
    return buf.getvalue()


def traces_to_json(traces: list[RoundTrace]) -> str:
    rows = [{"round": r.round,
             "grad_norm_sq_at_xt": r.grad_norm_sq_at_xt,
             "f_gap": r.f_gap,
             "sim_time_s": r.sim_time_s,
             "local_steps_executed": list(r.local_steps_executed)}
            for r in traces]
    return json.dumps(rows, indent=2)


def config_to_dict(config: MethodConfig) -> dict:
    sched = {k: v for k, v in vars(config.schedule).items() if v is not None}
    out = {"variant": config.variant, "n": config.n, "K": config.K,
           "R": config.R, "schedule": sched, "seed": config.seed}
    if config.record_tree:
        out["record_tree"] = True
    if config.async_budget_b is not None:
        out["async_budget_b"] = config.async_budget_b
    if config.async_worker_speeds is not None:
        out["async_worker_speeds"] = list(config.async_worker_speeds)
    return out


def config_from_dict(payload: dict) -> MethodConfig:
    if not isinstance(payload, dict):
        raise ConfigError("method config must be a JSON object")
    try:
        sched_in = payload.get("schedule", {})
        if not isinstance(sched_in, dict):
            raise ConfigError("schedule must be a JSON object")
        allowed = {"eta_g", "eta_l", "b", "K", "R_bound"}
        unknown = set(sched_in) - allowed
        if unknown:
            raise ConfigError(f"unknown schedule fields: {sorted(unknown)}")
        speeds = payload.get("async_worker_speeds")
        return MethodConfig(
            variant=payload["variant"],
            n=int(payload["n"]),
            K=int(payload["K"]),
            R=int(payload["R"]),
            schedule=ScheduleParams(**sched_in),
            seed=int(payload.get("seed", 0)),
            record_tree=bool(payload.get("record_tree", False)),
            async_budget_b=(None if payload.get("async_budget_b") is None
                            else int(payload["async_budget_b"])),
            async_worker_speeds=(None if speeds is None
                                 else tuple(float(v) for v in speeds)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config field: {exc.args[0]}") from exc
