"""Command-line entry point.

Subcommands:

- run:        execute one configured run, emit the round trace
- tune:       sweep a step-size grid per the plan, emit summary rows
- complexity: evaluate a closed-form time bound at one parameter point
- tree-check: validate a recorded computation tree file
- compare:    measured time-to-target vs the closed-form prediction

Exit codes: 0 success, 2 unusable configuration or arguments,
3 validation failure (a tree that breaks the admissibility conditions).
Relative --out paths resolve against $SGDTIME_OUT_DIR when it is set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from typing import Optional

from . import complexity as cx
from . import harness, methods
from .ctree import ComputationTree, TreeStructureError, validate_conditions
from .methods import ConfigError
from .timemodel import TimeModel

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sgdtime",
        description="Distributed SGD variants under a two-parameter "
                    "time model (h seconds per gradient, tau per sync).")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", help="output file (default: stdout); "
                       "relative paths resolve against $SGDTIME_OUT_DIR")
        p.add_argument("--format", choices=("csv", "json"), default="csv")

    def add_time(p: argparse.ArgumentParser) -> None:
        p.add_argument("--h-seconds", type=float, default=None,
                       help="override seconds per stochastic gradient")
        p.add_argument("--tau-seconds", type=float, default=None,
                       help="override seconds per synchronization")

    p_run = sub.add_parser("run", help="execute one configured run")
    p_run.add_argument("--config", required=True,
                       help="JSON file with problem and method sections")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the configured seed")
    p_run.add_argument("--record-tree", action="store_true",
                       help="record the computation tree during the run")
    p_run.add_argument("--tree-out",
                       help="write the recorded tree to this file")
    add_time(p_run)
    add_io(p_run)

    p_tune = sub.add_parser("tune", help="sweep the plan's step-size grid")
    p_tune.add_argument("--config", required=True, help="JSON plan file")
    add_time(p_tune)
    add_io(p_tune)

    p_cx = sub.add_parser("complexity",
                          help="evaluate a closed-form time bound")
    p_cx.add_argument("--formula", required=True,
                      choices=("local-lower", "minibatch-hero",
                               "dual-decaying", "async", "het-pair"))
    p_cx.add_argument("--setting", required=True, choices=cx.SETTINGS)
    p_cx.add_argument("--tau-seconds", type=float, required=True)
    p_cx.add_argument("--h-seconds", type=float, required=True)
    p_cx.add_argument("--L", type=float, required=True)
    p_cx.add_argument("--sigma2", type=float, required=True)
    p_cx.add_argument("--epsilon", type=float, required=True)
    p_cx.add_argument("--n", type=int, required=True)
    p_cx.add_argument("--delta", type=float, default=None,
                      help="f(x0) - f*, nonconvex settings")
    p_cx.add_argument("--B2", type=float, default=None,
                      help="||x0 - x*||^2, convex setting")

    p_tree = sub.add_parser("tree-check",
                            help="validate a recorded computation tree")
    p_tree.add_argument("--tree", required=True,
                        help="tree file (.json, or whitespace text format)")
    p_tree.add_argument("--gamma-g", type=float, required=True,
                        help="required main-branch step size")
    p_tree.add_argument("--r-bound", type=int, required=True,
                        help="allowed distance of gradient nodes from "
                             "the main branch")

    p_cmp = sub.add_parser("compare",
                           help="measured vs predicted time-to-target")
    p_cmp.add_argument("--config", required=True, help="JSON plan file")
    p_cmp.add_argument("--setting", required=True, choices=cx.SETTINGS)
    p_cmp.add_argument("--delta", type=float, default=None)
    p_cmp.add_argument("--B2", type=float, default=None)
    p_cmp.add_argument("--epsilon", type=float, default=None,
                       help="target accuracy (default: the plan's)")
    add_time(p_cmp)
    add_io(p_cmp)

    return parser


def _resolve_out(path: str) -> str:
    base = os.environ.get("SGDTIME_OUT_DIR")
    if base and not os.path.isabs(path):
        return os.path.join(base, path)
    return path


def _emit(text: str, out: Optional[str]) -> None:
    if out is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
        return
    with open(_resolve_out(out), "w") as fh:
        fh.write(text)


def _load_json(path: str) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc


def _time_model(args, default: TimeModel) -> TimeModel:
    h = default.h_seconds if args.h_seconds is None else args.h_seconds
    tau = default.tau_seconds if args.tau_seconds is None else args.tau_seconds
    return TimeModel(h, tau)


def _cmd_run(args) -> int:
    payload = _load_json(args.config)
    if not isinstance(payload, dict):
        raise ConfigError("run config must be a JSON object")
    if "problem" not in payload or "method" not in payload:
        raise ConfigError("run config needs 'problem' and 'method' sections")
    spec = harness.problem_from_dict(payload["problem"])
    config = methods.config_from_dict(payload["method"])
    tm_in = payload.get("time_model", {})
    if not isinstance(tm_in, dict):
        raise ConfigError("time_model must be a JSON object")
    tm = _time_model(args, TimeModel(float(tm_in.get("h_seconds", 1.0)),
                                     float(tm_in.get("tau_seconds", 1.0))))
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    if args.record_tree or args.tree_out:
        config = dataclasses.replace(config, record_tree=True)
    result = methods.run(spec, config, tm)
    if args.tree_out:
        with open(_resolve_out(args.tree_out), "w") as fh:
            fh.write(result.tree.to_text())
    if args.format == "json":
        _emit(methods.traces_to_json(result.traces), args.out)
    else:
        _emit(methods.traces_to_csv(result.traces), args.out)
    return 0


def _cmd_tune(args) -> int:
    plan = harness.plan_from_dict(_load_json(args.config))
    tm = _time_model(args, plan.time_model)
    if tm != plan.time_model:
        plan = dataclasses.replace(plan, time_model=tm)
    rows = harness.tune(plan)
    if args.format == "json":
        _emit(json.dumps([dataclasses.asdict(r) for r in rows], indent=2),
              args.out)
    else:
        _emit(harness.summary_to_csv(rows), args.out)
    return 0


def _cmd_complexity(args) -> int:
    try:
        query = cx.ComplexityQuery(setting=args.setting, tau=args.tau_seconds,
                                   h=args.h_seconds, L=args.L,
                                   sigma2=args.sigma2, epsilon=args.epsilon,
                                   n=args.n, delta=args.delta, B2=args.B2)
        convex = args.setting == "convex"
        if args.formula == "local-lower":
            values = [cx.local_sgd_lower_convex(query) if convex
                      else cx.local_sgd_lower_nonconvex(query)]
        elif args.formula == "minibatch-hero":
            values = [cx.minibatch_hero_upper_convex(query) if convex
                      else cx.minibatch_hero_upper_nonconvex(query)]
        elif args.formula == "dual-decaying":
            # nonconvex prints both guarantees: explicit 64-constant
            # expression, then the constants-1 one-worker fallback form
            values = ([cx.convex_dual_decaying_upper(query)] if convex
                      else list(cx.dual_decaying_upper_nonconvex(query)))
        elif args.formula == "async":
            values = list(cx.async_decaying_upper(query))
        else:
            values = list(cx.heterogeneous_pair(query))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for v in values:
        print(repr(v) if isinstance(v, float) else v)
    return 0


def _cmd_tree_check(args) -> int:
    with open(args.tree) as fh:
        text = fh.read()
    try:
        if args.tree.endswith(".json"):
            tree = ComputationTree.from_json(text)
        else:
            tree = ComputationTree.from_text(text)
    except TreeStructureError as exc:
        print(f"invalid tree: {exc}", file=sys.stderr)
        return 3
    try:
        report = validate_conditions(tree, args.gamma_g, args.r_bound)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for i, ok in enumerate([report.cond1_ok, report.cond2_ok,
                            report.cond3_ok, report.cond4_ok], start=1):
        print(f"condition {i}: {'ok' if ok else 'FAIL'}")
    print(f"observed_R: {report.observed_R}")
    for v in report.violations:
        print(f"node {v.node_id} (condition {v.condition}): {v.detail}")
    return 0 if report.all_ok else 3


def _cmd_compare(args) -> int:
    plan = harness.plan_from_dict(_load_json(args.config))
    tm = _time_model(args, plan.time_model)
    if tm != plan.time_model:
        plan = dataclasses.replace(plan, time_model=tm)
    epsilon = plan.epsilon_target if args.epsilon is None else args.epsilon
    spec = plan.problem
    try:
        query = cx.ComplexityQuery(
            setting=args.setting, tau=tm.tau_seconds, h=tm.h_seconds,
            L=spec.smoothness_L, sigma2=spec.noise_sigma2, epsilon=epsilon,
            n=spec.workers_n, delta=args.delta, B2=args.B2)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    rows = harness.compare_theory(plan, query)
    if args.format == "json":
        _emit(json.dumps([dataclasses.asdict(r) for r in rows], indent=2),
              args.out)
    else:
        _emit(harness.theory_to_csv(rows), args.out)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "tune": _cmd_tune,
    "complexity": _cmd_complexity,
    "tree-check": _cmd_tree_check,
    "compare": _cmd_compare,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed a message; --help exits 0, usage errors 2
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, TreeStructureError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
