"""Computation trees for auditing distributed SGD runs.

A tree records every stochastic-gradient step a run performs.  Each
non-root node y has a parent (the point the step started from), the node
whose point the gradient was evaluated at, the noise draw consumed, and
the step size.  Main-branch nodes form a root-anchored path holding the
aggregated iterates x^0, x^1, ...; all other nodes are workers' local
excursions.

``validate_conditions`` checks the four admissibility conditions under
which a recorded run inherits the generic convergence guarantee:

1. every main-branch edge consumes a fresh noise draw,
2. every main-branch gradient node's history is contained in the history
   of the iterate it is applied to,
3. gradient nodes stay within ``R_bound`` steps of the main branch,
4. main-branch steps equal gamma_g and off-branch steps respect the
   distance-indexed decaying bound.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

from .schedules import _guarded_ceil, offbranch_step_bound

__all__ = [
    "TreeNode",
    "TreeStructureError",
    "ComputationTree",
    "Violation",
    "ConditionReport",
    "tree_dist",
    "dist_to_main",
    "repr_of",
    "validate_conditions",
    "stationarity_iteration_bound",
]

_NONE = -1  # sentinel for absent ids in the text format


@dataclass(frozen=True)
class TreeNode:
    """One recorded point.  The root is the only node without a parent."""

    node_id: int
    parent_id: Optional[int]
    grad_node_id: Optional[int]  # node whose point the gradient was taken at
    draw_id: Optional[int]       # noise draw consumed by the step
    step_size: float
    main: bool
    main_index: Optional[int] = None  # position along the main branch


class TreeStructureError(ValueError):
    """The node set does not form a valid computation tree."""


class ComputationTree:
    """Append-only tree of gradient steps with a tagged main branch."""

    def __init__(self) -> None:
        root = TreeNode(0, None, None, None, 0.0, True, 0)
        self._nodes: list[TreeNode] = [root]
        self._depth: list[int] = [0]
        self._main_ids: list[int] = [0]

    @property
    def root_id(self) -> int:
        return 0

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node_id: int) -> TreeNode:
        if not 0 <= node_id < len(self._nodes):
            raise KeyError(f"unknown node {node_id}")
        return self._nodes[node_id]

    def depth(self, node_id: int) -> int:
        self.node(node_id)
        return self._depth[node_id]

    def main_branch(self) -> list[int]:
        """Node ids of x^0, x^1, ... in order."""
        return list(self._main_ids)

    def record_step(self, base_id: int, grad_node_id: int, step_size: float,
                    draw_id: int, main: bool = False) -> int:
        """Append the point base - step_size * g(grad_node; draw)."""
        self.node(base_id)
        self.node(grad_node_id)
        if main and base_id != self._main_ids[-1]:
            raise TreeStructureError(
                "main-branch step must extend the current main tip")
        node_id = len(self._nodes)
        idx = len(self._main_ids) if main else None
        self._nodes.append(TreeNode(node_id, base_id, grad_node_id,
                                    draw_id, float(step_size), main, idx))
        self._depth.append(self._depth[base_id] + 1)
        if main:
            self._main_ids.append(node_id)
        return node_id

    # -- serialization ----------------------------------------------------

    def to_text(self) -> str:
        """One line per node: id parent grad_node draw step main_flag."""
        lines = []
        for nd in self._nodes:
            parent = _NONE if nd.parent_id is None else nd.parent_id
            grad = _NONE if nd.grad_node_id is None else nd.grad_node_id
            draw = _NONE if nd.draw_id is None else nd.draw_id
            lines.append(f"{nd.node_id} {parent} {grad} {draw} "
                         f"{nd.step_size!r} {int(nd.main)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ComputationTree":
        rows = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 6:
                raise TreeStructureError(
                    f"line {lineno}: expected 6 fields, got {len(parts)}")
            try:
                rows.append((int(parts[0]), int(parts[1]), int(parts[2]),
                             int(parts[3]), float(parts[4]), int(parts[5])))
            except ValueError as exc:
                raise TreeStructureError(f"line {lineno}: {exc}") from exc
        return cls._from_rows(rows)

    def to_json(self) -> str:
        nodes = [{"id": nd.node_id, "parent": nd.parent_id,
                  "grad_node": nd.grad_node_id, "draw": nd.draw_id,
                  "step": nd.step_size, "main": nd.main}
                 for nd in self._nodes]
        return json.dumps({"nodes": nodes})

    @classmethod
    def from_json(cls, text: str) -> "ComputationTree":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TreeStructureError(f"invalid JSON: {exc}") from exc
        if not isinstance(payload, dict) or "nodes" not in payload:
            raise TreeStructureError("expected an object with a 'nodes' list")
        rows = []
        for entry in payload["nodes"]:
            def _id(v):
                return _NONE if v is None else int(v)
            rows.append((int(entry["id"]), _id(entry.get("parent")),
                         _id(entry.get("grad_node")), _id(entry.get("draw")),
                         float(entry["step"]), int(bool(entry["main"]))))
        return cls._from_rows(rows)

    @classmethod
    def _from_rows(cls, rows) -> "ComputationTree":
        if not rows:
            raise TreeStructureError("empty tree")
        rows = sorted(rows)
        ids = [r[0] for r in rows]
        if ids != list(range(len(rows))):
            raise TreeStructureError("node ids must be 0..N-1 without gaps")
        if rows[0][1] != _NONE:
            raise TreeStructureError("node 0 must be the parentless root")
        if not rows[0][5]:
            raise TreeStructureError("root must be on the main branch")
        tree = cls.__new__(cls)
        tree._nodes = []
        tree._depth = []
        tree._main_ids = []
        for node_id, parent, grad, draw, step, main in rows:
            if node_id == 0:
                if grad != _NONE or draw != _NONE or step != 0.0:
                    raise TreeStructureError(
                        "root carries no gradient, draw, or step")
                tree._nodes.append(TreeNode(0, None, None, None, 0.0, True, 0))
                tree._depth.append(0)
                tree._main_ids.append(0)
                continue
            if not 0 <= parent < node_id or not 0 <= grad < node_id:
                raise TreeStructureError(
                    f"node {node_id}: parent and grad node must precede it")
            if draw < 0:
                raise TreeStructureError(f"node {node_id}: missing draw id")
            idx = None
            if main:
                if parent != tree._main_ids[-1]:
                    raise TreeStructureError(
                        "main branch must form a root-anchored path")
                idx = len(tree._main_ids)
                tree._main_ids.append(node_id)
            tree._nodes.append(TreeNode(node_id, parent, grad, draw,
                                        step, bool(main), idx))
            tree._depth.append(tree._depth[parent] + 1)
        return tree


def _ancestor_depths(tree: ComputationTree, node_id: int) -> dict[int, int]:
    """Map each ancestor (incl. the node) to its depth on the root path."""
    out = {}
    cur: Optional[int] = node_id
    while cur is not None:
        out[cur] = tree.depth(cur)
        cur = tree.node(cur).parent_id
    return out


def tree_dist(tree: ComputationTree, a: int, b: int) -> int:
    """max(edges from a, edges from b) down to the closest common ancestor."""
    depths_a = _ancestor_depths(tree, a)
    cur = b
    while cur not in depths_a:
        cur = tree.node(cur).parent_id
        assert cur is not None  # every pair meets at the root
    cca_depth = depths_a[cur]
    return max(tree.depth(a) - cca_depth, tree.depth(b) - cca_depth)


def dist_to_main(tree: ComputationTree, node_id: int) -> int:
    """Distance from a node to the nearest main-branch node.

    Equals the number of edges up to the lowest main-branch ancestor:
    the main branch is a root-anchored path, so no other main node can
    be closer.
    """
    steps = 0
    cur = node_id
    while not tree.node(cur).main:
        cur = tree.node(cur).parent_id
        steps += 1
    return steps


def _main_anchor(tree: ComputationTree, node_id: int) -> tuple[int, list]:
    """Lowest main ancestor's main_index and the branch pairs below it."""
    pairs = []
    cur = node_id
    while not tree.node(cur).main:
        nd = tree.node(cur)
        pairs.append((nd.grad_node_id, nd.draw_id))
        cur = nd.parent_id
    return tree.node(cur).main_index, pairs


def repr_of(tree: ComputationTree, node_id: int) -> Counter:
    """Multiset of (grad node, draw) pairs consumed on the node's root path."""
    out: Counter = Counter()
    cur = node_id
    while cur != tree.root_id:
        nd = tree.node(cur)
        out[(nd.grad_node_id, nd.draw_id)] += 1
        cur = nd.parent_id
    return out


class Violation(NamedTuple):
    node_id: int
    condition: int
    detail: str


@dataclass
class ConditionReport:
    cond1_ok: bool
    cond2_ok: bool
    cond3_ok: bool
    cond4_ok: bool
    observed_R: int
    violations: list[Violation] = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return (self.cond1_ok and self.cond2_ok
                and self.cond3_ok and self.cond4_ok)


_STEP_SLACK = 1e-12  # relative tolerance on the off-branch step bound


def validate_conditions(tree: ComputationTree, gamma_g: float,
                        R_bound: int) -> ConditionReport:
    """Check the four admissibility conditions against gamma_g and R_bound."""
    if R_bound < 0:
        raise ValueError("R_bound must be nonnegative")
    if not gamma_g > 0:
        raise ValueError("gamma_g must be positive")
    main = tree.main_branch()
    violations: list[Violation] = []
    ok = [True, True, True, True]
    observed_R = 0

    def flag(node_id: int, cond: int, detail: str) -> None:
        ok[cond - 1] = False
        violations.append(Violation(node_id, cond, detail))

    # conditions 1-3 walk the main branch; repr(x^k) is maintained
    # incrementally as the multiset of main-edge pairs up to k
    main_pairs: list[tuple] = [None]  # index k -> pair of edge k (1-based)
    seen_draws: set[int] = set()
    for k in range(1, len(main)):
        nd = tree.node(main[k])
        pair = (nd.grad_node_id, nd.draw_id)
        main_pairs.append(pair)

        if nd.draw_id in seen_draws:
            flag(nd.node_id, 1, f"draw {nd.draw_id} already used on the "
                 "main branch")
        seen_draws.add(nd.draw_id)

        anchor_idx, branch_pairs = _main_anchor(tree, nd.grad_node_id)
        if anchor_idx > k - 1:
            flag(nd.node_id, 2, f"gradient node hangs off x^{anchor_idx}, "
                 f"ahead of the iterate x^{k - 1}")
        elif branch_pairs:
            window = Counter(main_pairs[anchor_idx + 1:k])
            window.subtract(Counter(branch_pairs))
            missing = +Counter({p: -c for p, c in window.items() if c < 0})
            if missing:
                sample = next(iter(missing))
                flag(nd.node_id, 2, f"pair {sample} on the gradient node's "
                     f"history is not in the history of x^{k - 1}")
        if nd.draw_id in (d for _, d in branch_pairs):
            flag(nd.node_id, 1, f"draw {nd.draw_id} already used on the "
                 "gradient node's branch")

        j = dist_to_main(tree, nd.grad_node_id)
        observed_R = max(observed_R, j)
        if j > R_bound:
            flag(nd.node_id, 3, f"gradient node is {j} steps off the main "
                 f"branch, bound is {R_bound}")

        if abs(nd.step_size - gamma_g) > math.ulp(max(abs(gamma_g),
                                                      abs(nd.step_size))):
            flag(nd.node_id, 4, f"main step {nd.step_size!r} != "
                 f"gamma_g {gamma_g!r}")

    # condition 4 on off-branch edges: step j below the fork obeys the
    # decaying bound sqrt(R / ((j+1)(ln R + 1))) * gamma_g
    for nd in (tree.node(i) for i in range(1, len(tree))):
        if nd.main:
            continue
        j = dist_to_main(tree, nd.parent_id)
        if R_bound == 0:
            bound = 0.0
        else:
            bound = math.sqrt(R_bound / ((j + 1) * (math.log(R_bound) + 1.0)))
            bound *= gamma_g
        if nd.step_size < 0.0 or nd.step_size > bound * (1.0 + _STEP_SLACK):
            flag(nd.node_id, 4, f"off-branch step {nd.step_size!r} at "
                 f"distance {j} violates bound {bound!r}")

    return ConditionReport(ok[0], ok[1], ok[2], ok[3], observed_R, violations)


def stationarity_iteration_bound(L: float, delta: float, epsilon: float,
                          sigma2: float, R_bound: int) -> int:
    """Main-branch length guaranteeing a gradient-norm stationarity point.

    ceil(8 (R+1) L delta / eps + 16 sigma^2 L delta / eps^2) main steps at
    gamma_g = main_branch_gamma_g(...) drive min_k E||grad f(x^k)||^2 below eps.
    """
    if L <= 0 or delta < 0 or epsilon <= 0 or sigma2 < 0 or R_bound < 0:
        raise ValueError("need L > 0, delta >= 0, epsilon > 0, "
                         "sigma2 >= 0, R_bound >= 0")
    fL, fd, fe, fs = (Fraction(L), Fraction(delta), Fraction(epsilon),
                      Fraction(sigma2))
    total = 8 * (R_bound + 1) * fL * fd / fe + 16 * fs * fL * fd / (fe * fe)
    return max(_guarded_ceil(total), 1)
