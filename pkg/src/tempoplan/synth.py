"""Synthetic demonstration generation from a declared ground truth.

A ground-truth spec fixes the actions, their hands and subtasks, one or
more task modes (a contradiction-free relation per intra-subtask pair,
with target timings), and noise scales. Each generated demonstration
samples a mode, perturbs the targets in timing space, and realizes
keypoints through the symbolic planner and the timing optimizer, so every
demonstration classifies exactly to its mode's relations by construction.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .assessment import Pair, canonical_pair
from .dataset import Dataset
from .errors import DatasetFormatError, NoSymbolicSolution, SpecInfeasible
from .inference import (Binding, ConstraintGraph, Edge, SubtaskPartition,
                        TaskAssignment, score_assignment)
from .model import (INVERSE, Action, ActionSequence, AllenRelation,
                    Demonstration, TemporalPlan, TimeEnrichedAction,
                    classify_relation, validate_demonstration)
from .planner import parametrize, symbolic_plan
from .timing import Timing3, embed_pair


@dataclass(frozen=True)
class ModeSpec:
    probability: float
    relations: Dict[Pair, AllenRelation]
    targets: Dict[Pair, Timing3]


@dataclass(frozen=True)
class GroundTruthSpec:
    name: str
    seed: int
    n_demos: int
    hands: Dict[Action, str]
    subtasks: Tuple[Tuple[Action, ...], ...]
    modes: Tuple[ModeSpec, ...]
    noise_length: float = 0.0
    noise_offset: float = 0.0
    gap_base: float = 1.0
    gap_jitter: float = 0.0
    shift_max: float = 0.0

    def actions(self) -> Tuple[Action, ...]:
        return tuple(sorted(self.hands.keys()))


def _mode_assignments(spec: GroundTruthSpec, mode: ModeSpec) -> List[TaskAssignment]:
    """One TaskAssignment per subtask, validated for contradiction-freeness."""
    from .planner import _check_consistent, _relation_matrix

    out = []
    for group in spec.subtasks:
        bindings = []
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                key = canonical_pair(a, b)
                if key not in mode.relations:
                    raise SpecInfeasible(
                        f"mode is missing a relation for pair ({key[0]}, {key[1]})")
                bindings.append(Binding(key, mode.relations[key], 1.0))
        assignment = TaskAssignment(tuple(bindings), score_assignment(bindings))
        actions = sorted(group)
        try:
            _check_consistent(_relation_matrix(assignment, actions), actions)
        except NoSymbolicSolution as e:
            raise SpecInfeasible(str(e))
        out.append(assignment)
    return out


def generate(spec: GroundTruthSpec) -> Dataset:
    """Sample a dataset realizing the spec's modes and noise. Deterministic."""
    rng = np.random.default_rng(spec.seed)
    probs = [m.probability for m in spec.modes]
    if abs(sum(probs) - 1.0) > 1e-9:
        raise SpecInfeasible(f"mode probabilities sum to {sum(probs)}, expected 1")

    plans = []  # per mode: list of (group, assignment, symbolic plan)
    for mode in spec.modes:
        per_subtask = []
        for group, assignment in zip(spec.subtasks, _mode_assignments(spec, mode)):
            try:
                sym = symbolic_plan(assignment, spec.hands)
            except NoSymbolicSolution as e:
                raise SpecInfeasible(f"mode has no symbolic witness: {e}")
            per_subtask.append((group, assignment, sym))
        plans.append(per_subtask)

    demos = []
    for d in range(spec.n_demos):
        mode_idx = int(rng.choice(len(spec.modes), p=probs))
        mode = spec.modes[mode_idx]
        left: List[TimeEnrichedAction] = []
        right: List[TimeEnrichedAction] = []
        offset = 0.0
        for group, assignment, sym in plans[mode_idx]:
            edges: Dict[Pair, Edge] = {}
            for b in assignment.bindings:
                t = mode.targets[b.pair]
                noisy = Timing3(
                    t.lam_a + rng.normal(0.0, spec.noise_length),
                    t.lam_b + rng.normal(0.0, spec.noise_length),
                    t.omega + rng.normal(0.0, spec.noise_offset),
                )
                edges[b.pair] = Edge(b.relation, noisy, 1.0)
            graph = ConstraintGraph(
                actions=tuple(sorted(group)),
                subtasks=SubtaskPartition((tuple(sorted(group)),)),
                assignments=(assignment,),
                edges=edges,
            )
            par = parametrize(sym, graph)
            lo = min(t.start for t in par.plan)
            hi = max(t.end for t in par.plan)
            for t in par.plan.left:
                left.append(t.shifted(offset - lo))
            for t in par.plan.right:
                right.append(t.shifted(offset - lo))
            gap = spec.gap_base
            if spec.gap_jitter > 0:
                gap = max(0.2, gap + float(rng.normal(0.0, spec.gap_jitter)))
            offset += (hi - lo) + gap
        shift = float(rng.uniform(0.0, spec.shift_max)) if spec.shift_max > 0 else 0.0
        demo = Demonstration(
            ActionSequence(sorted((t.shifted(shift) for t in left), key=lambda t: t.start)),
            ActionSequence(sorted((t.shifted(shift) for t in right), key=lambda t: t.start)),
            f"demo{d:03d}",
        )
        if validate_demonstration(demo):
            raise SpecInfeasible(f"generated demonstration {d} is structurally invalid")
        for b in (bnd for _, a, _ in plans[mode_idx] for bnd in a.bindings):
            ta, tb = demo.find(b.pair[0]), demo.find(b.pair[1])
            got = classify_relation(ta.interval, tb.interval)
            if got is not b.relation:
                raise SpecInfeasible(
                    f"generated demonstration {d} lost relation on "
                    f"({b.pair[0]}, {b.pair[1]})")
        demos.append(demo)
    return Dataset(spec.name, tuple(demos))


# JSON spec format; actions referenced as [verb, object] arrays.

def _action_ref(x, where: str, out: list) -> Optional[Action]:
    if (not isinstance(x, list)) or len(x) != 2 \
            or not all(isinstance(s, str) and s for s in x):
        out.append(f"{where}: expected [verb, object]")
        return None
    return Action(x[0], x[1])


def spec_from_dict(doc: dict) -> GroundTruthSpec:
    out: list = []
    name = doc.get("name", "synthetic")
    seed = doc.get("seed", 0)
    n_demos = doc.get("n_demos", 1)
    if not isinstance(n_demos, int) or n_demos < 1:
        out.append("n_demos: expected a positive integer")
    hands: Dict[Action, str] = {}
    by_subtask: Dict[int, List[Action]] = {}
    for i, ad in enumerate(doc.get("actions", [])):
        where = f"actions[{i}]"
        a = _action_ref([ad.get("verb"), ad.get("object")], where, out) \
            if isinstance(ad, dict) else None
        if a is None:
            out.append(f"{where}: expected an object with verb/object")
            continue
        hand = ad.get("hand")
        if hand not in ("L", "R"):
            out.append(f"{where}.hand: expected 'L' or 'R'")
            continue
        st = ad.get("subtask", 0)
        hands[a] = hand
        by_subtask.setdefault(st, []).append(a)
    subtasks = tuple(tuple(sorted(by_subtask[k])) for k in sorted(by_subtask))
    modes = []
    for i, md in enumerate(doc.get("modes", [])):
        where = f"modes[{i}]"
        rels: Dict[Pair, AllenRelation] = {}
        targets: Dict[Pair, Timing3] = {}
        for j, entry in enumerate(md.get("relations", [])):
            w = f"{where}.relations[{j}]"
            if not isinstance(entry, list) or len(entry) != 3:
                out.append(f"{w}: expected [[verb,object],[verb,object],relation]")
                continue
            a = _action_ref(entry[0], w, out)
            b = _action_ref(entry[1], w, out)
            try:
                r = AllenRelation(entry[2])
            except ValueError:
                out.append(f"{w}: unknown relation '{entry[2]}'")
                continue
            if a and b:
                key = canonical_pair(a, b)
                rels[key] = r if key == (a, b) else INVERSE[r]
        for j, entry in enumerate(md.get("targets", [])):
            w = f"{where}.targets[{j}]"
            if not isinstance(entry, list) or len(entry) != 3:
                out.append(f"{w}: expected [[verb,object],[verb,object],[lam_a,lam_b,omega]]")
                continue
            a = _action_ref(entry[0], w, out)
            b = _action_ref(entry[1], w, out)
            v = entry[2]
            if a and b and isinstance(v, list) and len(v) == 3:
                key = canonical_pair(a, b)
                t = Timing3(float(v[0]), float(v[1]), float(v[2]))
                if key != (a, b):
                    t = Timing3(t.lam_b, t.lam_a, -t.omega)
                targets[key] = t
        modes.append(ModeSpec(float(md.get("probability", 1.0)), rels, targets))
    if out:
        raise DatasetFormatError(out)
    noise = doc.get("noise", {})
    gap = doc.get("gap", {})
    spec = GroundTruthSpec(
        name=name, seed=seed, n_demos=n_demos, hands=hands, subtasks=subtasks,
        modes=tuple(modes),
        noise_length=float(noise.get("length", 0.0)),
        noise_offset=float(noise.get("offset", 0.0)),
        gap_base=float(gap.get("base", 1.0)),
        gap_jitter=float(gap.get("jitter", 0.0)),
        shift_max=float(doc.get("shift_max", 0.0)),
    )
    _fill_default_targets(spec)
    for mode in spec.modes:
        _mode_assignments(spec, mode)  # contradiction check at load
    return spec


def _fill_default_targets(spec: GroundTruthSpec) -> None:
    """Missing targets default to the symbolic witness timing at 1 s units."""
    for mode in spec.modes:
        missing = []
        for group in spec.subtasks:
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    key = canonical_pair(a, b)
                    if key in mode.relations and key not in mode.targets:
                        missing.append(key)
        if not missing:
            continue
        for group, assignment in zip(spec.subtasks, _mode_assignments(spec, mode)):
            try:
                sym = symbolic_plan(assignment, spec.hands)
            except NoSymbolicSolution as e:
                raise SpecInfeasible(f"mode has no symbolic witness: {e}")
            times = sym.times()
            for key in missing:
                if key[0] in times and key[1] in times:
                    mode.targets[key] = embed_pair(times[key[0]], times[key[1]])


def load_spec(path) -> GroundTruthSpec:
    with open(path) as f:
        try:
            doc = json.load(f)
        except json.JSONDecodeError as e:
            raise DatasetFormatError([f"line {e.lineno}, column {e.colno}: {e.msg}"])
    return spec_from_dict(doc)


def builtin_spec(name: str) -> GroundTruthSpec:
    """Load a spec bundled with the package (e.g. 'muesli_like')."""
    text = resources.files("tempoplan.data").joinpath(f"{name}.json").read_text()
    return spec_from_dict(json.loads(text))


_VERBS = ("grasp", "lift", "move", "turn", "press", "pour", "shake", "place")
_HOLD_VERBS = ("hold", "steady", "support", "brace")


def random_ground_truth(seed: int, n_subtasks: int = 1, two_mode: bool = False,
                        n_demos: int = 6, noise: float = 0.03) -> GroundTruthSpec:
    """Random nested two-hand task for round-trip tests.

    One hand executes a meets-chain; the other nests supporting actions
    strictly inside chain steps. All relations are then either high-support
    overlap-family relations or forced by composition through the chain, so
    the generating assignment is the unique score maximizer for low noise.
    """
    rng = np.random.default_rng([seed, 0xA5])
    hands: Dict[Action, str] = {}
    subtasks: List[Tuple[Action, ...]] = []
    placements: Dict[Action, Tuple[float, float]] = {}
    swapped: Dict[Action, Tuple[float, float]] = {}
    for st in range(n_subtasks):
        n_chain = int(rng.integers(2, 4))
        obj = f"item{st}"
        chain: List[Action] = []
        t = 0.0
        lens = []
        for i in range(n_chain):
            a = Action(_VERBS[(st * 3 + i) % len(_VERBS)], obj)
            length = float(rng.uniform(2.0, 4.0))
            placements[a] = (t, t + length)
            lens.append(length)
            t += length
            hands[a] = "L"
            chain.append(a)
        group: List[Action] = list(chain)
        n_nested = 0
        for i, parent in enumerate(chain):
            if rng.random() < 0.7 or (i == len(chain) - 1 and n_nested == 0):
                s, e = placements[parent]
                f0 = float(rng.uniform(0.15, 0.3))
                f1 = float(rng.uniform(0.7, 0.85))
                b = Action(_HOLD_VERBS[i % len(_HOLD_VERBS)], f"{obj}x")
                placements[b] = (s + f0 * (e - s), s + f1 * (e - s))
                hands[b] = "R"
                group.append(b)
                n_nested += 1
        subtasks.append(tuple(sorted(group)))
        if two_mode and n_chain >= 2:
            # second mode swaps the first two chain steps (and their nests)
            a0, a1 = chain[0], chain[1]
            s0, e0 = placements[a0]
            s1, e1 = placements[a1]
            swapped[a1] = (s0, s0 + (e1 - s1))
            swapped[a0] = (s0 + (e1 - s1), s0 + (e1 - s1) + (e0 - s0))
            for b in group:
                if b in chain:
                    continue
                ps, pe = placements[b]
                for parent in (a0, a1):
                    os_, oe = placements[parent]
                    if os_ <= ps and pe <= oe:
                        ns, ne = swapped[parent]
                        scale = (ne - ns) / (oe - os_)
                        swapped[b] = (ns + (ps - os_) * scale, ns + (pe - os_) * scale)

    def mode_from(positions: Dict[Action, Tuple[float, float]], prob: float) -> ModeSpec:
        rels: Dict[Pair, AllenRelation] = {}
        targets: Dict[Pair, Timing3] = {}
        for group in subtasks:
            for i, a in enumerate(group):
                for b in group[i + 1:]:
                    key = canonical_pair(a, b)
                    rels[key] = classify_relation(positions[key[0]], positions[key[1]])
                    targets[key] = embed_pair(positions[key[0]], positions[key[1]])
        return ModeSpec(prob, rels, targets)

    if two_mode:
        alt = dict(placements)
        alt.update(swapped)
        modes = (mode_from(placements, 0.5), mode_from(alt, 0.5))
    else:
        modes = (mode_from(placements, 1.0),)
    return GroundTruthSpec(
        name=f"nested-task-{seed}", seed=seed, n_demos=n_demos, hands=hands,
        subtasks=tuple(subtasks), modes=modes,
        noise_length=noise, noise_offset=noise,
        gap_base=1.0, gap_jitter=0.1 if noise > 0 else 0.0,
        shift_max=3.0 if noise > 0 else 0.0,
    )
