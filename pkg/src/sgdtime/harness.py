"""Experiment driver: step-size sweeps, aggregation, theory comparison.

A plan runs each method template over a step-size grid and a seed set.
Per (method, step size) the driver reports 5th/50th/95th percentiles of
the final metric across seeds and, when the running average of the
seed-averaged metric curve drops to the target, the rounds and
simulated seconds that took.  The grid value is always the
aggregation-scale step size eta_g; per-variant local step sizes are
derived from it (local: eta_l = n eta_g, dual: eta_l = sqrt(n) eta_g)
so a single grid is comparable across variants.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import complexity, methods
from .complexity import ComplexityQuery
from .methods import ConfigError, MethodConfig, RunResult
from .problems import (ProblemSpec, make_quadratic, make_synthetic_logreg,
                       make_toy_adversarial)
from .schedules import ScheduleParams
from .timemodel import TimeModel

__all__ = [
    "ExperimentPlan",
    "SummaryRow",
    "TheoryRow",
    "tune",
    "select_best",
    "compare_theory",
    "summary_to_csv",
    "theory_to_csv",
    "plan_to_dict",
    "plan_from_dict",
    "problem_to_dict",
    "problem_from_dict",
    "run_cli",
]

_METRICS = ("f_gap", "grad_norm_sq")


@dataclass(frozen=True)
class ExperimentPlan:
    problem: ProblemSpec
    methods: tuple[MethodConfig, ...]
    eta_grid: tuple[float, ...]
    seeds: tuple[int, ...]
    epsilon_target: float
    time_model: TimeModel
    metric: str = "f_gap"
    output_path: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.methods:
            raise ValueError("plan needs at least one method template")
        if not self.eta_grid or any(not e > 0 for e in self.eta_grid):
            raise ValueError("eta_grid must be positive step sizes")
        if not self.seeds:
            raise ValueError("plan needs at least one seed")
        if not self.epsilon_target > 0:
            raise ValueError("epsilon_target must be positive")
        if self.metric not in _METRICS:
            raise ValueError(f"metric must be one of {_METRICS}")


@dataclass(frozen=True)
class SummaryRow:
    method: str
    eta_g: float
    metric_median: float
    metric_p5: float
    metric_p95: float
    rounds_to_eps: Optional[int]
    sim_time_to_eps: Optional[float]


@dataclass(frozen=True)
class TheoryRow:
    method: str
    empirical_seconds: Optional[float]
    formula_seconds: float
    ratio: Optional[float]


def _derived_config(template: MethodConfig, eta: float, n: int) -> MethodConfig:
    variant = template.variant
    if variant == "local_sgd":
        sched = ScheduleParams(eta_l=n * eta)
    elif variant in ("minibatch_sgd", "hero_sgd"):
        sched = ScheduleParams(eta_g=eta)
    elif variant == "dual_local_sgd":
        sched = ScheduleParams(eta_g=eta, eta_l=math.sqrt(n) * eta)
    elif variant == "decaying_local_sgd":
        if template.schedule.b is None:
            raise ConfigError("decaying_local_sgd template needs schedule.b")
        sched = ScheduleParams(eta_g=eta, b=template.schedule.b)
    elif variant == "decaying_async":
        sched = ScheduleParams(eta_g=eta)
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    return replace(template, schedule=sched)


def _metric_curve(spec: ProblemSpec, result: RunResult, metric: str) -> np.ndarray:
    """Metric at x^0 .. x^R: trace rows, then the final point."""
    if metric == "f_gap":
        vals = [row.f_gap for row in result.traces
                if row.local_steps_executed != ()]
        vals.append(spec.f_gap(result.final_point))
    else:
        vals = [row.grad_norm_sq_at_xt for row in result.traces
                if row.local_steps_executed != ()]
        g = spec.grad(result.final_point)
        vals.append(float(g @ g))
    return np.array(vals)


def _round_seconds(result: RunResult, t: int) -> float:
    """Simulated seconds after t completed rounds."""
    return 0.0 if t == 0 else result.traces[t - 1].sim_time_s


def _first_hit(spec: ProblemSpec, results: list[RunResult], metric: str,
               target: float) -> tuple[Optional[int], Optional[float],
                                       np.ndarray]:
    """First round where the running average of the seed-averaged curve
    drops to the target.

    The guarantees bound the criterion averaged over rounds, not the
    last iterate, so the hit test uses the cumulative mean of the curve.
    Returns (rounds, seconds, final metric per seed).  Divergent seeds
    produce inf/nan curve entries; a poisoned running mean never
    crosses.
    """
    curves = np.stack([_metric_curve(spec, r, metric) for r in results])
    finals = curves[:, -1]
    with np.errstate(invalid="ignore"):
        mean = curves.mean(axis=0)
        running = np.cumsum(mean) / np.arange(1, mean.size + 1)
        hits = np.flatnonzero(running <= target)
    if hits.size == 0:
        return None, None, finals
    t = int(hits[0])
    return t, _round_seconds(results[0], t), finals


def tune(plan: ExperimentPlan) -> list[SummaryRow]:
    """Run the full grid; one row per (method template, grid step size)."""
    rows = []
    n = plan.problem.workers_n
    for template in plan.methods:
        for eta in plan.eta_grid:
            cfg = _derived_config(template, eta, n)
            results = [methods.run(plan.problem, replace(cfg, seed=s),
                                   plan.time_model) for s in plan.seeds]
            t, secs, finals = _first_hit(plan.problem, results, plan.metric,
                                         plan.epsilon_target)
            finite = finals[np.isfinite(finals)]
            if finite.size == 0:
                p5 = p50 = p95 = math.inf
            else:
                # diverged seeds count as +inf when ranking percentiles
                padded = np.concatenate([finite,
                                         np.full(finals.size - finite.size,
                                                 np.inf)])
                p5, p50, p95 = np.percentile(padded, [5, 50, 95])
            rows.append(SummaryRow(template.variant, eta, float(p50),
                                   float(p5), float(p95), t, secs))
    return rows


def select_best(rows: list[SummaryRow]) -> dict[str, SummaryRow]:
    """Best grid point per method: lowest final median, ties to the
    smaller step size.  Pure function of the summary rows."""
    best: dict[str, SummaryRow] = {}
    for row in sorted(rows, key=lambda r: (r.method, r.metric_median,
                                           r.eta_g)):
        if row.method not in best:
            best[row.method] = row
    return best


def _theory_seconds(variant: str, query: ComplexityQuery) -> float:
    if query.setting == "heterogeneous_nonconvex":
        lower, upper = complexity.heterogeneous_pair(query)
        return lower if variant == "local_sgd" else upper
    convex = query.setting == "convex"
    if variant == "local_sgd":
        return (complexity.local_sgd_lower_convex(query) if convex
                else complexity.local_sgd_lower_nonconvex(query))
    if variant in ("minibatch_sgd", "hero_sgd"):
        return (complexity.minibatch_hero_upper_convex(query) if convex
                else complexity.minibatch_hero_upper_nonconvex(query))
    if variant == "decaying_async":
        return complexity.async_decaying_upper(query)[0]
    if convex:
        return complexity.convex_dual_decaying_upper(query)
    # explicit-constant guarantee, the first of the returned pair
    return complexity.dual_decaying_upper_nonconvex(query)[0]


def compare_theory(plan: ExperimentPlan, query: ComplexityQuery) -> list[TheoryRow]:
    """Measured time-to-target vs the closed-form prediction.

    Templates run with their own schedules (no grid): the comparison is
    meaningful when those schedules came from the parameter
    prescriptions the formulas describe.  The empirical metric follows
    the query's setting: f_gap for convex, squared gradient norm
    otherwise.
    """
    metric = "f_gap" if query.setting == "convex" else "grad_norm_sq"
    rows = []
    for template in plan.methods:
        results = [methods.run(plan.problem, replace(template, seed=s),
                               plan.time_model) for s in plan.seeds]
        _, secs, _ = _first_hit(plan.problem, results, metric, query.epsilon)
        formula = _theory_seconds(template.variant, query)
        ratio = None if secs is None or formula == 0.0 else secs / formula
        rows.append(TheoryRow(template.variant, secs, formula, ratio))
    return rows


# -- serialization --------------------------------------------------------


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def summary_to_csv(rows: list[SummaryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "eta_g", "metric_median", "metric_p5",
                     "metric_p95", "rounds_to_eps", "sim_time_to_eps"])
    for r in rows:
        writer.writerow([r.method, _cell(r.eta_g), _cell(r.metric_median),
                         _cell(r.metric_p5), _cell(r.metric_p95),
                         _cell(r.rounds_to_eps),
                         _cell(r.sim_time_to_eps)])
    return buf.getvalue()


def theory_to_csv(rows: list[TheoryRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "empirical_seconds", "formula_seconds",
                     "ratio"])
    for r in rows:
        writer.writerow([r.method, _cell(r.empirical_seconds),
                         _cell(r.formula_seconds), _cell(r.ratio)])
    return buf.getvalue()


_PROBLEM_BUILDERS = {
    "toy_adversarial": make_toy_adversarial,
    "quadratic": make_quadratic,
}


def problem_to_dict(spec: ProblemSpec) -> dict:
    return {"kind": spec.kind, "params": dict(spec.init_params)}


def problem_from_dict(payload: dict) -> ProblemSpec:
    if not isinstance(payload, dict):
        raise ConfigError("problem section must be a JSON object")
    kind = payload.get("kind")
    params = payload.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("problem params must be a JSON object")
    if kind in _PROBLEM_BUILDERS:
        try:
            return _PROBLEM_BUILDERS[kind](**params)
        except TypeError as exc:
            # surfaces missing or unknown param names with exit code 2
            raise ConfigError(
                f"bad problem params for kind {kind!r}: {exc}") from exc
    if kind == "logreg_synth":
        needed = {"dimension", "samples", "n", "seed"}
        if not needed <= set(params):
            raise ConfigError("logreg_synth needs dimension, samples, n, "
                              "seed (problems built from raw arrays cannot "
                              "be loaded from JSON)")
        return make_synthetic_logreg(params["dimension"], params["samples"],
                                     params["n"], params["seed"])
    raise ConfigError(f"unknown problem kind {kind!r}")


def plan_to_dict(plan: ExperimentPlan) -> dict:
    return {
        "problem": problem_to_dict(plan.problem),
        "methods": [methods.config_to_dict(m) for m in plan.methods],
        "eta_grid": list(plan.eta_grid),
        "seeds": list(plan.seeds),
        "epsilon_target": plan.epsilon_target,
        "time_model": {"h_seconds": plan.time_model.h_seconds,
                       "tau_seconds": plan.time_model.tau_seconds},
        "metric": plan.metric,
        "output_path": plan.output_path,
    }


def plan_from_dict(payload: dict) -> ExperimentPlan:
    if not isinstance(payload, dict):
        raise ConfigError("plan must be a JSON object")
    try:
        tm = payload.get("time_model", {})
        if not isinstance(tm, dict):
            raise ConfigError("time_model must be a JSON object")
        entries = payload["methods"]
        if not isinstance(entries, list):
            raise ConfigError("plan field 'methods' must be a list")
        return ExperimentPlan(
            problem=problem_from_dict(payload["problem"]),
            methods=tuple(methods.config_from_dict(m) for m in entries),
            eta_grid=tuple(float(e) for e in payload["eta_grid"]),
            seeds=tuple(int(s) for s in payload["seeds"]),
            epsilon_target=float(payload["epsilon_target"]),
            time_model=TimeModel(float(tm.get("h_seconds", 1.0)),
                                 float(tm.get("tau_seconds", 1.0))),
            metric=payload.get("metric", "f_gap"),
            output_path=payload.get("output_path"),
        )
    except KeyError as exc:
        raise ConfigError(f"missing plan field: {exc.args[0]}") from exc


def plan_to_json(plan: ExperimentPlan) -> str:
    return json.dumps(plan_to_dict(plan), indent=2)


def plan_from_json(text: str) -> ExperimentPlan:
    try:
        return plan_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid plan JSON: {exc}") from exc


def run_cli(argv=None) -> int:
    """Console entry point: parse argv, dispatch a subcommand, return
    the exit code (0 ok, 2 config error, 3 validation failure)."""
    # deferred import; the CLI module imports this one
    from .cli import main
    return main(argv)
