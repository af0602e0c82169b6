"""Evaluation protocols: plan/demonstration distance, the
most-characteristic baseline, incremental learning curves, and the
assignment-search benchmark.
"""
from __future__ import annotations

import io
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .assessment import (Pair, RelationScoreTable, assess_all, canonical_pair,
                         collect_timings, _pair_seed)
from .dataset import Dataset
from .errors import (ActionSetMismatch, BenchTimeout, NoFeasibleAssignment,
                     PairNeverCoOccurs)
from .gmm import conditioned_argmax, fit_gmm
from .inference import (Binding, ConstraintGraph, Edge, SubtaskPartition,
                        TaskAssignment, _Instance, _search, _SearchLimit,
                        find_assignments, pre_assign, segment_subtasks)
from .model import INVERSE, Action, ActionSequence, Demonstration, TemporalPlan
from .planner import assign_hands, parametrize, symbolic_plan


def _keypoint_vector(obj, actions: Sequence[Action]) -> np.ndarray:
    vals = []
    for a in actions:
        t = obj.find(a)
        if t is None:
            raise ActionSetMismatch(f"action '{a}' missing")
        vals.extend(t.interval)
    return np.array(vals)


def plan_demo_distance(p, d) -> float:
    """Shift-minimized Euclidean distance between stacked keypoints.

    Actions are matched by (verb, object) and stacked in lexicographic
    order, (start, end) per action; the optimal uniform shift is the mean
    keypoint difference, subtracted in closed form.
    """
    pa = set(p.actions())
    da = set(d.actions())
    if pa != da:
        raise ActionSetMismatch(
            f"plan and demonstration differ: only-plan={sorted(pa - da)} "
            f"only-demo={sorted(da - pa)}")
    actions = sorted(pa)
    diff = _keypoint_vector(d, actions) - _keypoint_vector(p, actions)
    diff -= diff.mean()
    return float(np.linalg.norm(diff))


def most_characteristic(demos: Sequence[Demonstration]) -> Demonstration:
    """The demonstration with minimum total distance to all the others."""
    if not demos:
        raise ValueError("need at least one demonstration")
    totals = []
    for i, d in enumerate(demos):
        totals.append(sum(plan_demo_distance(d, other)
                          for j, other in enumerate(demos) if j != i))
    best = min(range(len(demos)), key=lambda i: (totals[i], demos[i].id))
    return demos[best]


def _restrict(demo: Demonstration, actions: Iterable[Action]) -> Demonstration:
    keep = set(actions)
    return Demonstration(
        ActionSequence(a for a in demo.left if a.action in keep),
        ActionSequence(a for a in demo.right if a.action in keep),
        demo.id,
    )


@dataclass
class EvalReport:
    """Incremental-learning curves: plan vs. most-characteristic baseline.

    One row per (trial, prefix size). The plan distance is the mean
    distance to all demonstrations known at that prefix; the baseline is
    the most characteristic prefix demonstration's mean distance to the
    other known demonstrations (undefined at prefix size 1).
    """

    subtask_actions: Tuple[Action, ...]
    trials: int
    seed: int
    rows: List[dict] = field(default_factory=list)

    def aggregates(self) -> List[dict]:
        out = []
        sizes = sorted({r["prefix"] for r in self.rows})
        for k in sizes:
            plan = [r["plan_distance"] for r in self.rows if r["prefix"] == k]
            base = [r["baseline_distance"] for r in self.rows
                    if r["prefix"] == k and r["baseline_distance"] is not None]
            entry = {
                "prefix": k,
                "plan_mean": float(np.mean(plan)),
                "plan_var": float(np.var(plan)),
            }
            if base:
                entry["baseline_mean"] = float(np.mean(base))
                entry["baseline_var"] = float(np.var(base))
            out.append(entry)
        return out

    def win_fraction(self) -> float:
        """Fraction of cells with defined baseline where the plan is closer."""
        cells = [r for r in self.rows if r["baseline_distance"] is not None]
        if not cells:
            return 1.0
        wins = sum(1 for r in cells if r["plan_distance"] <= r["baseline_distance"])
        return wins / len(cells)

    def to_dict(self) -> dict:
        return {
            "subtask_actions": [str(a) for a in self.subtask_actions],
            "trials": self.trials,
            "seed": self.seed,
            "distance_definition": "mean over demonstrations known at the prefix",
            "rows": self.rows,
            "aggregates": self.aggregates(),
            "win_fraction": self.win_fraction(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("trial,prefix,plan_distance,baseline_distance\n")
        for r in self.rows:
            base = "" if r["baseline_distance"] is None else repr(r["baseline_distance"])
            buf.write(f"{r['trial']},{r['prefix']},{r['plan_distance']!r},{base}\n")
        return buf.getvalue()


def incremental_eval(dataset: Dataset, trials: int = 50, seed: int = 0,
                     subtask_index: Optional[int] = None, rank: int = 0,
                     eps: float = 0.1, k_max: int = 5, theta: float = 0.999,
                     margin: float = 0.05, min_length: float = 0.2) -> EvalReport:
    """Feed demonstrations one at a time and track plan quality per prefix.

    The task assignment (and with it the symbolic plan) is fixed once from
    the full dataset so curves are comparable; only the timing models are
    refit per prefix. Evaluation is per subtask: the largest one by default.
    """
    table, _ = assess_all(dataset, eps=eps, k_max=k_max, seed=seed)
    partition = segment_subtasks(dataset, table, theta)
    if subtask_index is None:
        subtask_index = max(range(len(partition.groups)),
                            key=lambda i: (len(partition.groups[i]), -i))
    group = partition.groups[subtask_index]
    pre = pre_assign(table, group, theta)
    ranked = find_assignments(group, table, pre=pre)
    if rank >= len(ranked):
        raise NoFeasibleAssignment(
            f"subtask has {len(ranked)} assignments; rank {rank} requested")
    assignment = ranked[rank]
    hands = assign_hands(dataset)
    sym = symbolic_plan(assignment, hands)

    demos = dataset.demonstrations
    report = EvalReport(subtask_actions=group, trials=trials, seed=seed)
    cache: Dict[frozenset, object] = {}

    def plan_for(prefix: Tuple[Demonstration, ...]):
        key = frozenset(d.id for d in prefix)
        if key in cache:
            return cache[key]
        prefix_ds = Dataset(dataset.task, prefix)
        edges: Dict[Pair, Edge] = {}
        for i_p, b in enumerate(assignment.bindings):
            target = None
            try:
                pts = collect_timings(prefix_ds, b.pair)
                model = fit_gmm(pts, k_max=k_max, seed=_pair_seed(seed, i_p))
                target = conditioned_argmax(model, b.relation, margin)
            except PairNeverCoOccurs:
                pass
            edges[b.pair] = Edge(b.relation, target, b.score)
        graph = ConstraintGraph(actions=group,
                                subtasks=SubtaskPartition((group,)),
                                assignments=(assignment,), edges=edges)
        par = parametrize(sym, graph, margin=margin, min_length=min_length)
        cache[key] = par.plan
        return par.plan

    for trial in range(trials):
        rng = np.random.default_rng([seed, trial])
        order = rng.permutation(len(demos))
        for k in range(1, len(demos) + 1):
            prefix = tuple(demos[i] for i in order[:k])
            plan = plan_for(prefix)
            restricted = [_restrict(d, group) for d in prefix]
            plan_dist = float(np.mean([plan_demo_distance(plan, d) for d in restricted]))
            baseline = None
            if k >= 2:
                mc = most_characteristic(restricted)
                others = [d for d in restricted if d.id != mc.id]
                baseline = float(np.mean([plan_demo_distance(mc, d) for d in others]))
            report.rows.append({
                "trial": trial, "prefix": k,
                "plan_distance": plan_dist, "baseline_distance": baseline,
            })
    return report


@dataclass
class BenchTrace:
    """Time series of the search frontier: one sample per interval."""

    samples: List[Tuple[float, int, int]]  # (elapsed s, partials, solutions)
    n_solutions: int
    wall_time: float
    completed: bool

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("elapsed_seconds,partial_assignments,solutions\n")
        for t, partials, solutions in self.samples:
            buf.write(f"{t!r},{partials},{solutions}\n")
        return buf.getvalue()


def bench_assignments(actions: Sequence[Action], table: Optional[RelationScoreTable],
                      pre: Iterable[Binding] = (), sample_interval: float = 0.25,
                      time_limit: Optional[float] = None) -> BenchTrace:
    """Run the assignment search, sampling frontier size and solution count.

    The solutions series is non-decreasing and the final sample reports an
    empty frontier when the search completes. Exceeding ``time_limit``
    raises BenchTimeout with the partial trace attached.
    """
    inst = _Instance(actions, table)
    pre_map: Dict[int, int] = {}
    for b in pre:
        key = canonical_pair(*b.pair)
        k = inst.pair_index[(inst.index[key[0]], inst.index[key[1]])]
        r = b.relation if key == b.pair else INVERSE[b.relation]
        pre_map[k] = r.index

    t0 = time.monotonic()
    samples: List[Tuple[float, int, int]] = [(0.0, 1, 0)]
    state = {"next": t0 + sample_interval, "solutions": 0}
    deadline = t0 + time_limit if time_limit is not None else None

    def on_solution(score, rels):
        state["solutions"] += 1

    def on_node(stack, solutions, nodes):
        now = time.monotonic()
        if now >= state["next"]:
            samples.append((now - t0, stack, solutions))
            state["next"] = now + sample_interval

    try:
        _search(inst, pre_map, on_solution, on_node=on_node, deadline=deadline)
    except _SearchLimit:
        wall = time.monotonic() - t0
        trace = BenchTrace(samples=samples, n_solutions=state["solutions"],
                           wall_time=wall, completed=False)
        raise BenchTimeout(f"benchmark exceeded {time_limit} s", trace=trace)
    wall = time.monotonic() - t0
    samples.append((wall, 0, state["solutions"]))
    return BenchTrace(samples=samples, n_solutions=state["solutions"],
                      wall_time=wall, completed=True)
