"""Two-hand plan synthesis: symbolic grid search, then timing optimization.

The symbolic stage finds integer start/end times realizing a task
assignment by depth-first search over placements with unit lengths. The
parametrization stage then minimizes the stacked timing-space distance to
the per-pair target timings subject to the assignment's Allen regions,
per-hand ordering, and a minimum action length. Relation equalities (meets,
starts, finishes, equals) identify keypoints, so they are eliminated by
merging variables and hold exactly in the result; the remaining strict
inequalities are tightened by the margin and handled by an active-set QP.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .allen import compose
from .assessment import Pair, assess_all, canonical_pair
from .dataset import Dataset
from .errors import InfeasibleConstraints, NoSymbolicSolution, SolverStall
from .inference import ConstraintGraph, TaskAssignment, infer_constraints
from .model import (INVERSE, Action, ActionSequence, AllenRelation,
                    TemporalPlan, TimeEnrichedAction, classify_relation)
from .qp import solve_qp
from .timing import SQRT2, Timing3, embed_pair

DEFAULT_MARGIN = 0.05
DEFAULT_MIN_LENGTH = 0.2
DEFAULT_L_MAX = 5
DEFAULT_HORIZON_FACTOR = 4
DEFAULT_GAP = 1.0

_PRECEDENCE = (AllenRelation.BEFORE, AllenRelation.AFTER,
               AllenRelation.MEETS, AllenRelation.MET_BY)

# relations whose first interval starts strictly before the second
_STARTS_FIRST = (AllenRelation.BEFORE, AllenRelation.MEETS, AllenRelation.OVERLAPS,
                 AllenRelation.FINISHED_BY, AllenRelation.CONTAINS)
_STARTS_TOGETHER = (AllenRelation.STARTS, AllenRelation.STARTED_BY, AllenRelation.EQUALS)


@dataclass(frozen=True)
class SymbolicPlan:
    """Integer-grid plan realizing one task assignment."""

    plan: TemporalPlan
    unit: float
    assignment: TaskAssignment
    hands: Dict[Action, str]

    def times(self) -> Dict[Action, Tuple[float, float]]:
        return {a.action: (a.start, a.end) for a in self.plan}


@dataclass(frozen=True)
class ParametrizedPlan:
    """Real-valued plan with per-pair residuals to the target timings."""

    plan: TemporalPlan
    objective_value: float
    residuals: Dict[Pair, float]
    targets: Dict[Pair, Timing3]
    achieved: Dict[Pair, Timing3]
    stalled: bool = False
    provenance: dict = field(default_factory=dict)


def assign_hands(dataset: Dataset) -> Dict[Action, str]:
    """Majority-vote hand per action; ties go to the earliest demonstration."""
    votes: Dict[Action, Dict[str, int]] = {}
    first_seen: Dict[Action, str] = {}
    for demo in dataset.demonstrations:
        for hand, seq in (("L", demo.left), ("R", demo.right)):
            for a in seq:
                votes.setdefault(a.action, {"L": 0, "R": 0})[hand] += 1
                first_seen.setdefault(a.action, hand)
    out = {}
    for action, v in votes.items():
        if v["L"] > v["R"]:
            out[action] = "L"
        elif v["R"] > v["L"]:
            out[action] = "R"
        else:
            out[action] = first_seen[action]
    return out


def _relation_matrix(assignment: TaskAssignment, actions: Sequence[Action]):
    idx = {a: i for i, a in enumerate(actions)}
    n = len(actions)
    rel: List[List[Optional[AllenRelation]]] = [[None] * n for _ in range(n)]
    for b in assignment.bindings:
        x, y = b.pair
        rel[idx[x]][idx[y]] = b.relation
        rel[idx[y]][idx[x]] = INVERSE[b.relation]
    return rel


def _check_consistent(rel, actions) -> None:
    n = len(actions)
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if len({i, j, k}) < 3:
                    continue
                if rel[i][j] is None or rel[j][k] is None or rel[i][k] is None:
                    continue
                if rel[i][k] not in compose(rel[i][j], rel[j][k]):
                    raise NoSymbolicSolution(
                        f"assignment is contradictory on triple "
                        f"({actions[i]}, {actions[j]}, {actions[k]})")


def symbolic_plan(assignment: TaskAssignment, hands: Dict[Action, str],
                  l_max: int = DEFAULT_L_MAX,
                  horizon_factor: int = DEFAULT_HORIZON_FACTOR,
                  unit: float = 1.0) -> SymbolicPlan:
    """Find integer times realizing every assigned relation.

    Depth-first search over (start, length) placements on a grid of
    ``horizon_factor * n`` steps with lengths up to ``l_max``, deepened one
    unit at a time when no witness fits. Actions are placed in the start
    order implied by the assignment so that conflicts surface immediately.
    """
    actions = sorted({a for b in assignment.bindings for a in b.pair})
    if not actions:
        raise NoSymbolicSolution("assignment has no bindings")
    rel = _relation_matrix(assignment, actions)
    n = len(actions)
    for i in range(n):
        for j in range(i + 1, n):
            if rel[i][j] is None:
                raise NoSymbolicSolution(
                    f"assignment is incomplete: no relation for "
                    f"({actions[i]}, {actions[j]})")
            if hands.get(actions[i]) == hands.get(actions[j]) \
                    and rel[i][j] not in _PRECEDENCE:
                raise NoSymbolicSolution(
                    f"same-hand actions {actions[i]} / {actions[j]} are assigned "
                    f"the overlapping relation {rel[i][j].value}")
    _check_consistent(rel, actions)

    start_rank = []
    for i in range(n):
        rank = 0
        for j in range(n):
            if i != j and rel[j][i] in _STARTS_FIRST:
                rank += 1
        start_rank.append(rank)
    order = sorted(range(n), key=lambda i: (start_rank[i], i))

    horizon = horizon_factor * n
    max_len_cap = max(l_max, 2 * n)

    def search(cap: int) -> Optional[Dict[int, Tuple[int, int]]]:
        placed: Dict[int, Tuple[int, int]] = {}

        def ok(i: int, start: int, end: int) -> bool:
            for j, (ps, pe) in placed.items():
                if classify_relation((start, end), (ps, pe)) is not rel[i][j]:
                    return False
                if hands.get(actions[i]) == hands.get(actions[j]) \
                        and not (end <= ps or start >= pe):
                    return False
            return True

        def rec(depth: int) -> bool:
            if depth == n:
                return True
            i = order[depth]
            for start in range(horizon):
                for length in range(1, min(cap, horizon - start) + 1):
                    if ok(i, start, start + length):
                        placed[i] = (start, start + length)
                        if rec(depth + 1):
                            return True
                        del placed[i]
            return False

        return dict(placed) if rec(0) else None

    cap = l_max
    placed = search(cap)
    while placed is None and cap < max_len_cap:
        cap += 1
        placed = search(cap)
    if placed is None:
        raise NoSymbolicSolution(
            f"no integer witness within horizon {horizon} and length {max_len_cap}")

    by_hand: Dict[str, List[TimeEnrichedAction]] = {"L": [], "R": []}
    for i, (s, e) in placed.items():
        by_hand[hands.get(actions[i], "L")].append(
            TimeEnrichedAction(actions[i], float(s), float(e)))
    left = ActionSequence(sorted(by_hand["L"], key=lambda a: a.start))
    right = ActionSequence(sorted(by_hand["R"], key=lambda a: a.start))
    return SymbolicPlan(plan=TemporalPlan(left, right, grid=unit), unit=unit,
                        assignment=assignment, hands=dict(hands))


# keypoint ids: (action index, 0) = start, (action index, 1) = end

_MERGES = {
    AllenRelation.MEETS: (((0, 1), (1, 0)),),
    AllenRelation.MET_BY: (((1, 1), (0, 0)),),
    AllenRelation.STARTS: (((0, 0), (1, 0)),),
    AllenRelation.STARTED_BY: (((0, 0), (1, 0)),),
    AllenRelation.FINISHES: (((0, 1), (1, 1)),),
    AllenRelation.FINISHED_BY: (((0, 1), (1, 1)),),
    AllenRelation.EQUALS: (((0, 0), (1, 0)), ((0, 1), (1, 1))),
}

# inequality rows per relation on (a, b): (kp of a-or-b minuend, kp subtrahend)
# meaning minuend - subtrahend >= margin
_INEQS = {
    AllenRelation.BEFORE: (((1, 0), (0, 1)),),
    AllenRelation.AFTER: (((0, 0), (1, 1)),),
    AllenRelation.OVERLAPS: (((1, 0), (0, 0)), ((0, 1), (1, 0)), ((1, 1), (0, 1))),
    AllenRelation.OVERLAPPED_BY: (((0, 0), (1, 0)), ((1, 1), (0, 0)), ((0, 1), (1, 1))),
    AllenRelation.STARTS: (((1, 1), (0, 1)),),
    AllenRelation.STARTED_BY: (((0, 1), (1, 1)),),
    AllenRelation.DURING: (((0, 0), (1, 0)), ((1, 1), (0, 1))),
    AllenRelation.CONTAINS: (((1, 0), (0, 0)), ((0, 1), (1, 1))),
    AllenRelation.FINISHES: (((0, 0), (1, 0)),),
    AllenRelation.FINISHED_BY: (((1, 0), (0, 0)),),
    AllenRelation.MEETS: (),
    AllenRelation.MET_BY: (),
    AllenRelation.EQUALS: (),
}

_TIEBREAK_RIDGE = 1e-10


def parametrize(sym: SymbolicPlan, graph: ConstraintGraph,
                margin: float = DEFAULT_MARGIN,
                min_length: float = DEFAULT_MIN_LENGTH) -> ParametrizedPlan:
    """Optimize real keypoints toward the per-pair target timings.

    Minimizes the Euclidean norm of all per-pair timing distances subject
    to every pair's assigned Allen region (strict inequalities tightened by
    ``margin``), per-hand ordering, and lengths >= ``min_length``. Pairs
    without a target (no timing model) only contribute constraints. The
    symbolic plan provides the feasible start, so the relations certified
    there are preserved exactly.
    """
    actions = sorted(a.action for a in sym.plan)
    n = len(actions)
    times = sym.times()
    x_sym = {a: (times[a][0] * sym.unit, times[a][1] * sym.unit) for a in actions}

    pairs: List[Tuple[int, int]] = [(i, j) for i in range(n) for j in range(i + 1, n)]
    rel_of: Dict[Tuple[int, int], AllenRelation] = {}
    target_of: Dict[Tuple[int, int], Timing3] = {}
    for i, j in pairs:
        edge = graph.edge(actions[i], actions[j])
        rel_of[(i, j)] = edge.relation
        if edge.target is not None:
            target_of[(i, j)] = edge.target
        got = classify_relation(x_sym[actions[i]], x_sym[actions[j]])
        if got is not edge.relation:
            raise InfeasibleConstraints(
                f"symbolic plan violates its assignment on "
                f"({actions[i]}, {actions[j]}): {got.value} != {edge.relation.value}")

    # merge keypoints identified by relation equalities
    kp_ids = [(i, w) for i in range(n) for w in (0, 1)]
    parent = {kp: kp for kp in kp_ids}

    def find(kp):
        while parent[kp] != kp:
            parent[kp] = parent[parent[kp]]
            kp = parent[kp]
        return kp

    def union(a, b):
        parent[find(a)] = find(b)

    for (i, j), r in rel_of.items():
        for (pa, wa), (pb, wb) in _MERGES.get(r, ()):
            ij = (i, j)
            union((ij[pa], wa), (ij[pb], wb))
    for i in range(n):
        if find((i, 0)) == find((i, 1)):
            raise InfeasibleConstraints(
                f"relation equalities collapse '{actions[i]}' to zero length")

    roots = sorted({find(kp) for kp in kp_ids})
    # pin the gauge: the (merged) start of the earliest symbolic action is constant
    earliest = min(range(n), key=lambda i: (x_sym[actions[i]][0], i))
    pinned = find((earliest, 0))
    pin_value = x_sym[actions[earliest]][0]
    var_ids = [r for r in roots if r != pinned]
    var_index = {r: k for k, r in enumerate(var_ids)}
    nv = len(var_ids)

    def kp_value(kp, z):
        r = find(kp)
        return pin_value if r == pinned else z[var_index[r]]

    def kp_row(kp, coeff, row, const):
        r = find(kp)
        if r == pinned:
            return const + coeff * pin_value
        row[var_index[r]] += coeff
        return const

    z0 = np.zeros(nv)
    for kp in kp_ids:
        r = find(kp)
        if r != pinned:
            z0[var_index[r]] = x_sym[actions[kp[0]]][kp[1]]

    # objective rows: per target pair, the three timing-space coordinates
    rows, consts = [], []
    for (i, j), target in sorted(target_of.items()):
        tv = target.as_array()
        for coeffs, t_val in (
            ((((i, 1), 1 / SQRT2), ((i, 0), -1 / SQRT2)), tv[0]),
            ((((j, 1), 1 / SQRT2), ((j, 0), -1 / SQRT2)), tv[1]),
            ((((j, 0), 0.5), ((j, 1), 0.5), ((i, 0), -0.5), ((i, 1), -0.5)), tv[2]),
        ):
            row = np.zeros(nv)
            const = -t_val
            for kp, c in coeffs:
                const = kp_row(kp, c, row, const)
            rows.append(row)
            consts.append(const)
    a_mat = np.array(rows) if rows else np.zeros((0, nv))
    r0 = np.array(consts)

    # constraints: G z >= h
    g_rows, h_vals = [], []

    def add_ineq(kp_pos, kp_neg, rhs):
        row = np.zeros(nv)
        const = 0.0
        const = kp_row(kp_pos, 1.0, row, const)
        const = kp_row(kp_neg, -1.0, row, const)
        g_rows.append(row)
        h_vals.append(rhs - const)

    for (i, j), r in sorted(rel_of.items()):
        for (pa, wa), (pb, wb) in _INEQS[r]:
            ij = (i, j)
            add_ineq((ij[pa], wa), (ij[pb], wb), margin)
    for i in range(n):
        add_ineq((i, 1), (i, 0), min_length)
    for hand in ("L", "R"):
        seq = [a for a in (sym.plan.left if hand == "L" else sym.plan.right)]
        for prev, cur in zip(seq, seq[1:]):
            ia = actions.index(prev.action)
            ib = actions.index(cur.action)
            add_ineq((ib, 0), (ia, 1), 0.0)

    g_mat = np.array(g_rows) if g_rows else np.zeros((0, nv))
    h_vec = np.array(h_vals)
    if nv and len(g_mat) and np.any(g_mat @ z0 < h_vec - 1e-9):
        raise InfeasibleConstraints(
            "symbolic start violates the tightened constraints; "
            "margin or min_length exceeds the grid unit")

    stalled = False
    if nv == 0:
        z = z0
    else:
        p_mat = 2.0 * a_mat.T @ a_mat + 2.0 * _TIEBREAK_RIDGE * np.eye(nv)
        q_vec = 2.0 * a_mat.T @ r0 - 2.0 * _TIEBREAK_RIDGE * z0
        try:
            z = solve_qp(p_mat, q_vec, g_mat, h_vec, z0).x
        except SolverStall as e:
            z = e.best.x
            stalled = True

    final: Dict[Action, Tuple[float, float]] = {}
    for i, a in enumerate(actions):
        final[a] = (float(kp_value((i, 0), z)), float(kp_value((i, 1), z)))

    by_hand: Dict[str, List[TimeEnrichedAction]] = {"L": [], "R": []}
    for a in actions:
        hand = sym.hands.get(a, "L")
        by_hand[hand].append(TimeEnrichedAction(a, final[a][0], final[a][1]))
    plan = TemporalPlan(
        ActionSequence(sorted(by_hand["L"], key=lambda t: t.start)),
        ActionSequence(sorted(by_hand["R"], key=lambda t: t.start)),
    )

    residuals: Dict[Pair, float] = {}
    targets: Dict[Pair, Timing3] = {}
    achieved: Dict[Pair, Timing3] = {}
    obj_sq = 0.0
    for (i, j), target in sorted(target_of.items()):
        got = embed_pair(final[actions[i]], final[actions[j]])
        key = canonical_pair(actions[i], actions[j])
        d = math.sqrt(
            (got.lam_a - target.lam_a) ** 2 + (got.lam_b - target.lam_b) ** 2
            + (got.omega - target.omega) ** 2)
        residuals[key] = d
        targets[key] = target
        achieved[key] = got
        obj_sq += d * d

    for (i, j), r in rel_of.items():
        got = classify_relation(final[actions[i]], final[actions[j]])
        if got is not r:
            raise InfeasibleConstraints(
                f"optimized plan lost relation on ({actions[i]}, {actions[j]}): "
                f"{got.value} != {r.value}")

    return ParametrizedPlan(plan=plan, objective_value=math.sqrt(obj_sq),
                            residuals=residuals, targets=targets,
                            achieved=achieved, stalled=stalled)


def _shift_plan(plan: TemporalPlan, offset: float) -> TemporalPlan:
    return TemporalPlan(plan.left.shifted(offset), plan.right.shifted(offset), plan.grid)


def plan_pipeline(dataset: Dataset, rank: int = 0, *, eps: float = 0.1,
                  k_max: int = 5, seed: int = 0, theta: float = 0.999,
                  margin: float = DEFAULT_MARGIN,
                  min_length: float = DEFAULT_MIN_LENGTH,
                  l_max: int = DEFAULT_L_MAX,
                  horizon_factor: int = DEFAULT_HORIZON_FACTOR,
                  unit: float = 1.0, gap: float = DEFAULT_GAP) -> ParametrizedPlan:
    """Full pipeline: assess, infer, plan per subtask, optimize, concatenate.

    Subtask blocks are parametrized independently (their cross pairs are
    plain precedence) and laid out in execution order with a fixed ``gap``
    between consecutive blocks.
    """
    table, models = assess_all(dataset, eps=eps, k_max=k_max, seed=seed)
    graph = infer_constraints(dataset, table, models, rank=rank, theta=theta,
                              margin=margin)
    hands = assign_hands(dataset)

    blocks: List[ParametrizedPlan] = []
    for group, assignment in zip(graph.subtasks.groups, graph.assignments):
        if len(group) == 1:
            action = group[0]
            t = TimeEnrichedAction(action, 0.0, max(unit, min_length))
            seq = ActionSequence([t])
            empty = ActionSequence(())
            plan = TemporalPlan(seq, empty) if hands.get(action, "L") == "L" \
                else TemporalPlan(empty, seq)
            blocks.append(ParametrizedPlan(plan=plan, objective_value=0.0,
                                           residuals={}, targets={}, achieved={}))
            continue
        sym = symbolic_plan(assignment, hands, l_max=l_max,
                            horizon_factor=horizon_factor, unit=unit)
        blocks.append(parametrize(sym, graph, margin=margin, min_length=min_length))

    left: List[TimeEnrichedAction] = []
    right: List[TimeEnrichedAction] = []
    offset = 0.0
    block_spans = []
    for b in blocks:
        lo = min(t.start for t in b.plan)
        hi = max(t.end for t in b.plan)
        shifted = _shift_plan(b.plan, offset - lo)
        left.extend(shifted.left)
        right.extend(shifted.right)
        block_spans.append((offset, offset + (hi - lo)))
        offset += (hi - lo) + gap

    plan = TemporalPlan(ActionSequence(sorted(left, key=lambda t: t.start)),
                        ActionSequence(sorted(right, key=lambda t: t.start)))
    residuals = {}
    targets = {}
    achieved = {}
    obj_sq = 0.0
    for b in blocks:
        residuals.update(b.residuals)
        targets.update(b.targets)
        achieved.update(b.achieved)
        obj_sq += b.objective_value ** 2
    provenance = {
        "rank": rank,
        "subtasks": [[str(a) for a in g] for g in graph.subtasks.groups],
        "block_spans": block_spans,
        "assignment_scores": [a.score for a in graph.assignments],
        "gap": gap,
    }
    return ParametrizedPlan(plan=plan, objective_value=math.sqrt(obj_sq),
                            residuals=residuals, targets=targets, achieved=achieved,
                            stalled=any(b.stalled for b in blocks),
                            provenance=provenance)
