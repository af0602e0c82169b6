"""Exhaustive search for all contradiction-free Allen-relation assignments.

A backtracking search assigns one relation per unordered action pair,
pruning with the composition table: a candidate relation for pair (a, c) is
feasible iff it lies in compose(R_ab, R_bc) for every intermediate b whose
two edges are already assigned. Per-pair relation domains are maintained as
13-bit masks and narrowed on each assignment (forward checking), which both
implements the feasibility check and powers the most-constrained-first pair
selection. The returned set is complete: every contradiction-free complete
assignment extending the given pre-assignment is produced exactly once.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

from .allen import COMPOSITION_MASKS, compose
from .assessment import Pair, RelationScoreTable, canonical_pair
from .dataset import Dataset
from .errors import NoFeasibleAssignment
from .gmm import TimingModel, conditioned_argmax
from .model import INVERSE, RELATIONS, Action, AllenRelation
from .timing import Timing3

THETA_PRE = 0.999

_FULL_MASK = (1 << 13) - 1
_INV_IDX = [INVERSE[r].index for r in RELATIONS]
_POPCOUNT = [bin(m).count("1") for m in range(1 << 13)]
_NON_PRECEDENCE_MASK = _FULL_MASK & ~(1 << AllenRelation.BEFORE.index) & ~(1 << AllenRelation.AFTER.index)

PRE_ASSIGNABLE = (AllenRelation.MEETS, AllenRelation.MET_BY,
                  AllenRelation.BEFORE, AllenRelation.AFTER)


@dataclass(frozen=True)
class Binding:
    """One pair's assigned relation with its demonstration support."""

    pair: Pair
    relation: AllenRelation
    score: float


@dataclass(frozen=True)
class TaskAssignment:
    """A contradiction-free complete assignment over all pairs in scope."""

    bindings: Tuple[Binding, ...]
    score: float

    def relation(self, a: Action, b: Action) -> AllenRelation:
        key = canonical_pair(a, b)
        for binding in self.bindings:
            if binding.pair == key:
                return binding.relation if key == (a, b) else INVERSE[binding.relation]
        raise KeyError(f"no binding for pair ({a}, {b})")

    def relation_map(self) -> Dict[Pair, AllenRelation]:
        return {b.pair: b.relation for b in self.bindings}


@dataclass(frozen=True)
class PartialTaskAssignment:
    unassigned: Tuple[Pair, ...]
    assigned: Tuple[Binding, ...]


@dataclass(frozen=True)
class SubtaskPartition:
    """Action groups in execution order; cross-group pairs are precedence."""

    groups: Tuple[Tuple[Action, ...], ...]

    def group_of(self, a: Action) -> int:
        for i, g in enumerate(self.groups):
            if a in g:
                return i
        raise KeyError(str(a))


def score_assignment(bindings: Iterable[Binding]) -> float:
    """Sum of binding scores whose relation is not plain precedence."""
    return float(sum(
        b.score for b in bindings
        if b.relation not in (AllenRelation.BEFORE, AllenRelation.AFTER)
    ))


def is_feasible(assigned: Iterable[Binding], candidate: Binding) -> bool:
    """Composition-table consistency of adding ``candidate`` to ``assigned``.

    For every intermediate action b with both (a, b) and (b, c) assigned,
    the candidate relation between a and c must lie in compose(R_ab, R_bc).
    Bindings are stored in one orientation per pair; inverses are applied
    transparently.
    """
    a, c = candidate.pair
    rel: Dict[Tuple[Action, Action], AllenRelation] = {}
    for b in assigned:
        x, y = b.pair
        rel[(x, y)] = b.relation
        rel[(y, x)] = INVERSE[b.relation]
    mids = {x for (x, _) in rel}
    for m in mids:
        if m in (a, c):
            continue
        r1 = rel.get((a, m))
        r2 = rel.get((m, c))
        if r1 is None or r2 is None:
            continue
        if candidate.relation not in compose(r1, r2):
            return False
    return True


class _Instance:
    """Index-based view of an action set with canonical pair ordering."""

    def __init__(self, actions: Sequence[Action], table: Optional[RelationScoreTable]):
        self.actions: Tuple[Action, ...] = tuple(sorted(actions))
        self.index = {a: i for i, a in enumerate(self.actions)}
        n = len(self.actions)
        self.pairs: List[Tuple[int, int]] = [(i, j) for i in range(n) for j in range(i + 1, n)]
        self.pair_index = {p: k for k, p in enumerate(self.pairs)}
        self.scores: List[List[float]] = []
        for i, j in self.pairs:
            a, b = self.actions[i], self.actions[j]
            if table is None:
                row = [0.0] * 13
            else:
                row = [table.score(a, b, r) for r in RELATIONS]
            self.scores.append(row)
        self.try_order = [
            sorted(range(13), key=lambda r, row=row: (-row[r], r))
            for row in self.scores
        ]

    def pair_of(self, k: int) -> Pair:
        i, j = self.pairs[k]
        return (self.actions[i], self.actions[j])

    def solution_score(self, rels: Sequence[int]) -> float:
        return sum(
            self.scores[k][r]
            for k, r in enumerate(rels)
            if (1 << r) & _NON_PRECEDENCE_MASK
        )


class _SearchLimit(Exception):
    pass


def _search(inst: _Instance, pre: Dict[int, int],
            on_solution: Callable[[float, Tuple[int, ...]], None],
            on_node: Optional[Callable[[int, int, int], None]] = None,
            heuristic: str = "mcf",
            deadline: Optional[float] = None) -> None:
    """Core DFS. ``pre`` maps pair index to a fixed relation index.

    ``on_node`` receives (pending partial assignments, solutions, nodes)
    each time a partial assignment is expanded.
    """
    n = len(inst.actions)
    n_pairs = len(inst.pairs)
    rel = [[-1] * n for _ in range(n)]
    domains = [_FULL_MASK] * n_pairs
    unassigned = set(range(n_pairs))
    cmask = COMPOSITION_MASKS
    inv = _INV_IDX
    popcount = _POPCOUNT
    pair_index = inst.pair_index
    pairs = inst.pairs

    state = {"stack": 1, "solutions": 0, "nodes": 0}

    def assign(k: int, r: int, trail: list) -> bool:
        i, j = pairs[k]
        rel[i][j] = r
        rel[j][i] = inv[r]
        trail.append((k, domains[k]))
        domains[k] = 1 << r
        for m in range(n):
            if m == i or m == j:
                continue
            if rel[j][m] >= 0 and rel[i][m] < 0:
                q = pair_index[(i, m) if i < m else (m, i)]
                mask = cmask[rel[i][j]][rel[j][m]] if i < m else cmask[rel[m][j]][rel[j][i]]
                old = domains[q]
                new = old & mask
                if new != old:
                    trail.append((q, old))
                    domains[q] = new
                    if not new:
                        return False
            if rel[i][m] >= 0 and rel[j][m] < 0:
                q = pair_index[(j, m) if j < m else (m, j)]
                mask = cmask[rel[j][i]][rel[i][m]] if j < m else cmask[rel[m][i]][rel[i][j]]
                old = domains[q]
                new = old & mask
                if new != old:
                    trail.append((q, old))
                    domains[q] = new
                    if not new:
                        return False
        return True

    def undo(k: int, trail: list) -> None:
        i, j = pairs[k]
        rel[i][j] = -1
        rel[j][i] = -1
        for q, old in reversed(trail):
            domains[q] = old

    # seed pre-assignments; a wiped domain means no consistent completion
    for k, r in sorted(pre.items()):
        if not (domains[k] >> r & 1):
            return
        unassigned.discard(k)
        if not assign(k, r, []):
            return

    def dfs() -> None:
        state["stack"] -= 1
        state["nodes"] += 1
        if on_node is not None and state["nodes"] % 512 == 0:
            on_node(state["stack"], state["solutions"], state["nodes"])
            if deadline is not None and time.monotonic() > deadline:
                raise _SearchLimit()
        if not unassigned:
            state["solutions"] += 1
            rels = tuple(domains[k].bit_length() - 1 for k in range(n_pairs))
            on_solution(inst.solution_score(rels), rels)
            return
        if heuristic == "mcf":
            k = min(unassigned, key=lambda q: (popcount[domains[q]], q))
        else:
            k = min(unassigned)
        children = [r for r in inst.try_order[k] if domains[k] >> r & 1]
        state["stack"] += len(children)
        unassigned.discard(k)
        for r in children:
            trail: list = []
            if assign(k, r, trail):
                dfs()
            else:
                state["stack"] -= 1
            undo(k, trail)
        unassigned.add(k)

    dfs()
    if on_node is not None:
        on_node(state["stack"], state["solutions"], state["nodes"])


def _materialize(inst: _Instance, score: float, rels: Tuple[int, ...]) -> TaskAssignment:
    bindings = tuple(
        Binding(inst.pair_of(k), RELATIONS[r], inst.scores[k][r])
        for k, r in enumerate(rels)
    )
    return TaskAssignment(bindings=bindings, score=score)


def find_assignments(actions: Sequence[Action], table: Optional[RelationScoreTable] = None,
                     pre: Iterable[Binding] = (), heuristic: str = "mcf") -> List[TaskAssignment]:
    """All contradiction-free complete assignments, best score first.

    Ties are broken by the lexicographic encoding of the relation choices
    over canonically ordered pairs, so the output order is deterministic
    and independent of the pair-selection heuristic.
    """
    inst = _Instance(actions, table)
    pre_map: Dict[int, int] = {}
    for b in pre:
        key = canonical_pair(*b.pair)
        k = inst.pair_index[(inst.index[key[0]], inst.index[key[1]])]
        r = b.relation if key == b.pair else INVERSE[b.relation]
        if k in pre_map and pre_map[k] != r.index:
            raise NoFeasibleAssignment("conflicting pre-assignments for one pair")
        pre_map[k] = r.index
    found: List[Tuple[float, Tuple[int, ...]]] = []
    _search(inst, pre_map, lambda s, rels: found.append((s, rels)), heuristic=heuristic)
    if not found:
        raise NoFeasibleAssignment("no contradiction-free complete assignment")
    found.sort(key=lambda item: (-item[0], item[1]))
    return [_materialize(inst, s, rels) for s, rels in found]


def assign_next(t: PartialTaskAssignment, table: Optional[RelationScoreTable] = None) -> List[PartialTaskAssignment]:
    """Expand a partial assignment by one pair.

    Pops the most constrained unassigned pair (fewest feasible relations
    given the current bindings), tries all 13 relations in descending score
    order, and keeps the feasible extensions. An empty result signals a
    dead end that forces backtracking in the outer search.
    """
    if not t.unassigned:
        raise ValueError("no unassigned pairs left")

    def feasible_relations(pair: Pair) -> List[AllenRelation]:
        out = []
        for r in RELATIONS:
            s = table.score(pair[0], pair[1], r) if table is not None else 0.0
            if is_feasible(t.assigned, Binding(pair, r, s)):
                out.append(r)
        return out

    ranked = sorted(
        t.unassigned,
        key=lambda p: (len(feasible_relations(p)), p),
    )
    pair = ranked[0]
    rest = tuple(p for p in t.unassigned if p != pair)
    children = []
    rels = feasible_relations(pair)
    rels.sort(key=lambda r: (-(table.score(pair[0], pair[1], r) if table else 0.0), r.index))
    for r in rels:
        s = table.score(pair[0], pair[1], r) if table is not None else 0.0
        children.append(PartialTaskAssignment(
            unassigned=rest,
            assigned=t.assigned + (Binding(pair, r, s),),
        ))
    return children


def pre_assign(table: RelationScoreTable, actions: Optional[Sequence[Action]] = None,
               theta: float = THETA_PRE) -> List[Binding]:
    """Fix pairs whose meets/met-by/before/after support reaches ``theta``."""
    out = []
    scope = None if actions is None else set(actions)
    for pair in table.pairs():
        a, b = pair
        if scope is not None and (a not in scope or b not in scope):
            continue
        best = max(PRE_ASSIGNABLE, key=lambda r: (table.score(a, b, r), -r.index))
        s = table.score(a, b, best)
        if s >= theta:
            out.append(Binding(pair, best, s))
    return out


def segment_subtasks(dataset: Dataset, table: RelationScoreTable,
                     theta: float = THETA_PRE) -> SubtaskPartition:
    """Group actions so that every cross-group pair is unanimous precedence.

    Pairs without near-certain before/after support (including pairs that
    never co-occur) are kept in one group; group order follows the observed
    precedence direction, merging groups whenever directions conflict.
    """
    actions = dataset.actions()
    n = len(actions)
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(x, y):
        parent[find(x)] = find(y)

    def precedence(i, j):
        a, b = actions[i], actions[j]
        key = canonical_pair(a, b)
        if key not in table.scores:
            return None
        if table.score(a, b, AllenRelation.BEFORE) >= theta:
            return AllenRelation.BEFORE
        if table.score(a, b, AllenRelation.AFTER) >= theta:
            return AllenRelation.AFTER
        return None

    for i in range(n):
        for j in range(i + 1, n):
            if precedence(i, j) is None:
                union(i, j)

    changed = True
    while changed:
        changed = False
        roots = sorted({find(i) for i in range(n)})
        members = {r: [i for i in range(n) if find(i) == r] for r in roots}
        for gi in range(len(roots)):
            for gj in range(gi + 1, len(roots)):
                dirs = {precedence(i, j) for i in members[roots[gi]] for j in members[roots[gj]]}
                if len(dirs) > 1 or None in dirs:
                    union(roots[gi], roots[gj])
                    changed = True
        if changed:
            continue
        # topological order over groups; a cycle forces a merge
        order, cyclic = _topo_groups(roots, members, precedence)
        if cyclic:
            union(cyclic[0], cyclic[1])
            changed = True
        else:
            groups = tuple(tuple(actions[i] for i in sorted(members[r])) for r in order)
            return SubtaskPartition(groups=groups)
    raise AssertionError("unreachable")


def _topo_groups(roots, members, precedence):
    succ = {r: set() for r in roots}
    indeg = {r: 0 for r in roots}
    for gi in roots:
        for gj in roots:
            if gi >= gj:
                continue
            d = precedence(members[gi][0], members[gj][0])
            if d is AllenRelation.BEFORE:
                succ[gi].add(gj)
                indeg[gj] += 1
            elif d is AllenRelation.AFTER:
                succ[gj].add(gi)
                indeg[gi] += 1
    order = []
    ready = sorted(r for r in roots if indeg[r] == 0)
    while ready:
        r = ready.pop(0)
        order.append(r)
        for s in sorted(succ[r]):
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
        ready.sort()
    if len(order) < len(roots):
        remaining = [r for r in roots if r not in order]
        return order, (remaining[0], remaining[1] if len(remaining) > 1 else remaining[0])
    return order, None


@dataclass(frozen=True)
class Edge:
    relation: AllenRelation
    target: Optional[Timing3]
    score: float


@dataclass(frozen=True)
class ConstraintGraph:
    """Symbolic relations plus subsymbolic target timings per pair."""

    actions: Tuple[Action, ...]
    subtasks: SubtaskPartition
    assignments: Tuple[TaskAssignment, ...]
    edges: Dict[Pair, Edge] = field(default_factory=dict)

    def edge(self, a: Action, b: Action) -> Edge:
        key = canonical_pair(a, b)
        e = self.edges[key]
        if key == (a, b):
            return e
        target = None
        if e.target is not None:
            target = Timing3(e.target.lam_b, e.target.lam_a, -e.target.omega)
        return Edge(INVERSE[e.relation], target, e.score)


def infer_constraints(dataset: Dataset, table: RelationScoreTable,
                      models: Dict[Pair, TimingModel],
                      rank: int = 0, theta: float = THETA_PRE,
                      margin: float = 0.05) -> ConstraintGraph:
    """Select a task assignment per subtask and attach target timings.

    ``rank`` picks the rank-th best assignment within every subtask; each
    in-scope pair's target is the maximum-density timing of its model
    restricted to the assigned relation's region.
    """
    partition = segment_subtasks(dataset, table, theta)
    assignments = []
    edges: Dict[Pair, Edge] = {}
    for group in partition.groups:
        pre = pre_assign(table, group, theta)
        ranked = find_assignments(group, table, pre=pre)
        if rank >= len(ranked):
            raise NoFeasibleAssignment(
                f"subtask has {len(ranked)} assignments; rank {rank} requested")
        chosen = ranked[rank]
        assignments.append(chosen)
        for b in chosen.bindings:
            target = None
            if b.pair in models:
                target = conditioned_argmax(models[b.pair], b.relation, margin)
            edges[b.pair] = Edge(b.relation, target, b.score)
    # cross-subtask pairs: plain precedence by execution order
    for gi in range(len(partition.groups)):
        for gj in range(gi + 1, len(partition.groups)):
            for a in partition.groups[gi]:
                for b in partition.groups[gj]:
                    key = canonical_pair(a, b)
                    r = AllenRelation.BEFORE if key == (a, b) else AllenRelation.AFTER
                    edges[key] = Edge(r, None, 0.0)
    return ConstraintGraph(
        actions=dataset.actions(),
        subtasks=partition,
        assignments=tuple(assignments),
        edges=edges,
    )
