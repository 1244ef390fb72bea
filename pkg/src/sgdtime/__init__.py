"""Distributed SGD variants under an explicit time model.

The package simulates and audits six SGD variants (local, minibatch,
single-worker, two-step-size local, decaying-step local, and an
asynchronous decaying variant) where a stochastic gradient costs h
seconds and a synchronization costs tau seconds.  It provides the
parameter prescriptions that make the multi-worker variants provably
competitive, closed-form time-to-accuracy formulas, computation-tree
recording with admissibility checking, and a tuning harness.
"""

from .complexity import (ComplexityQuery, RegimeRow, async_decaying_upper,
                         convex_dual_decaying_upper,
                         dual_decaying_upper_nonconvex, heterogeneous_pair,
                         local_sgd_lower_convex, local_sgd_lower_nonconvex,
                         minibatch_hero_upper_convex,
                         minibatch_hero_upper_nonconvex, regime_report)
from .ctree import (ComputationTree, ConditionReport, TreeNode,
                    TreeStructureError, Violation, stationarity_iteration_bound,
                    dist_to_main, repr_of, tree_dist, validate_conditions)
from .harness import (ExperimentPlan, SummaryRow, TheoryRow, compare_theory,
                      plan_from_dict, plan_to_dict, run_cli, select_best,
                      summary_to_csv, theory_to_csv, tune)
from .methods import (VARIANTS, ConfigError, MethodConfig, RoundTrace,
                      RunResult, config_from_dict, config_to_dict, run,
                      run_decaying_async, run_decaying_local_sgd,
                      run_dual_local_sgd, run_hero_sgd, run_local_sgd,
                      run_minibatch_sgd, traces_to_csv, traces_to_json,
                      validate_config)
from .problems import (GradSample, ProblemSpec, StreamPool, logreg_from_data,
                       make_quadratic, make_synthetic_logreg,
                       make_toy_adversarial, sample_gradient)
from .schedules import (ScheduleParams, main_branch_gamma_g, offbranch_step_bound,
                        decaying_params_convex, decaying_params_nonconvex,
                        decaying_step, decaying_steps, dual_params_convex,
                        dual_params_nonconvex)
from .timemodel import (TimeModel, async_completion_schedule,
                        async_round_time, charge, hero_total_time,
                        sync_round_time)

__version__ = "1.0.0"

__all__ = [
    "ComplexityQuery", "RegimeRow", "async_decaying_upper",
    "convex_dual_decaying_upper", "dual_decaying_upper_nonconvex",
    "heterogeneous_pair", "local_sgd_lower_convex",
    "local_sgd_lower_nonconvex", "minibatch_hero_upper_convex",
    "minibatch_hero_upper_nonconvex", "regime_report",
    "ComputationTree", "ConditionReport", "TreeNode", "TreeStructureError",
    "Violation", "stationarity_iteration_bound", "dist_to_main", "repr_of",
    "tree_dist", "validate_conditions",
    "ExperimentPlan", "SummaryRow", "TheoryRow", "compare_theory",
    "plan_from_dict", "plan_to_dict", "run_cli", "select_best",
    "summary_to_csv", "theory_to_csv", "tune",
    "VARIANTS", "ConfigError", "MethodConfig", "RoundTrace", "RunResult",
    "config_from_dict", "config_to_dict", "run", "run_decaying_async",
    "run_decaying_local_sgd", "run_dual_local_sgd", "run_hero_sgd",
    "run_local_sgd", "run_minibatch_sgd", "traces_to_csv", "traces_to_json",
    "validate_config",
    "GradSample", "ProblemSpec", "StreamPool", "logreg_from_data",
    "make_quadratic", "make_synthetic_logreg", "make_toy_adversarial",
    "sample_gradient",
    "ScheduleParams", "main_branch_gamma_g", "offbranch_step_bound",
    "decaying_params_convex", "decaying_params_nonconvex", "decaying_step",
    "decaying_steps", "dual_params_convex", "dual_params_nonconvex",
    "TimeModel", "async_completion_schedule", "async_round_time", "charge",
    "hero_total_time", "sync_round_time",
    "__version__",
]
