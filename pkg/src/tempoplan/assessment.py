"""Per-pair relation scoring and timing-model fitting over a dataset.

Each demonstration contributes a fuzzy membership in [0, 1] to every Allen
relation of every co-occurring action pair: the relation's defining keypoint
(in)equalities are smoothed with a triangular kernel of half-width eps
(equalities use the kernel itself, strict inequalities its cumulative), and
the per-predicate values combine by minimum. Scores are the per-demo means,
so eps = 0 reduces them to empirical relation frequencies.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset
from .errors import EmptyDataset, PairNeverCoOccurs
from .gmm import TimingModel, fit_gmm, model_to_dict
from .model import INVERSE, RELATIONS, Action, AllenRelation
from .timing import Timing3, embed_pair

Pair = Tuple[Action, Action]

DEFAULT_EPS = 0.1


def canonical_pair(a: Action, b: Action) -> Pair:
    return (a, b) if (a.verb, a.object) <= (b.verb, b.object) else (b, a)


def _mu_eq(d: float, eps: float) -> float:
    if eps == 0.0:
        return 1.0 if d == 0.0 else 0.0
    return max(0.0, 1.0 - abs(d) / eps)


def _mu_gt(d: float, eps: float) -> float:
    """Smoothed membership of d > 0 (triangular-kernel cumulative)."""
    if eps == 0.0:
        return 1.0 if d > 0.0 else 0.0
    if d <= -eps:
        return 0.0
    if d >= eps:
        return 1.0
    if d < 0.0:
        return (d + eps) ** 2 / (2.0 * eps * eps)
    return 1.0 - (eps - d) ** 2 / (2.0 * eps * eps)


def _mu_lt(d: float, eps: float) -> float:
    return _mu_gt(-d, eps)


def relation_membership(a: Tuple[float, float], b: Tuple[float, float],
                        r: AllenRelation, eps: float) -> float:
    """Fuzzy degree to which interval pair (a, b) exhibits relation r."""
    d_start = b[0] - a[0]
    d_end = b[1] - a[1]
    d_meet = b[0] - a[1]
    d_metby = b[1] - a[0]
    R = AllenRelation
    if r is R.BEFORE:
        return _mu_gt(d_meet, eps)
    if r is R.AFTER:
        return _mu_lt(d_metby, eps)
    if r is R.MEETS:
        return _mu_eq(d_meet, eps)
    if r is R.MET_BY:
        return _mu_eq(d_metby, eps)
    if r is R.OVERLAPS:
        return min(_mu_gt(d_start, eps), _mu_lt(d_meet, eps), _mu_gt(d_end, eps))
    if r is R.OVERLAPPED_BY:
        return min(_mu_lt(d_start, eps), _mu_gt(d_metby, eps), _mu_lt(d_end, eps))
    if r is R.STARTS:
        return min(_mu_eq(d_start, eps), _mu_gt(d_end, eps))
    if r is R.STARTED_BY:
        return min(_mu_eq(d_start, eps), _mu_lt(d_end, eps))
    if r is R.DURING:
        return min(_mu_lt(d_start, eps), _mu_gt(d_end, eps))
    if r is R.CONTAINS:
        return min(_mu_gt(d_start, eps), _mu_lt(d_end, eps))
    if r is R.FINISHES:
        return min(_mu_eq(d_end, eps), _mu_lt(d_start, eps))
    if r is R.FINISHED_BY:
        return min(_mu_eq(d_end, eps), _mu_gt(d_start, eps))
    return min(_mu_eq(d_start, eps), _mu_eq(d_end, eps))


@dataclass
class RelationScoreTable:
    """Scores per ordered pair and relation; stored once per unordered pair.

    Lookups for the reversed orientation transparently apply the relation
    inverse, so score(a, b, R) == score(b, a, inverse(R)) exactly.
    """

    scores: Dict[Pair, Dict[AllenRelation, float]] = field(default_factory=dict)
    co_occurrences: Dict[Pair, int] = field(default_factory=dict)
    never_co_occurring: Tuple[Pair, ...] = ()

    def pairs(self) -> List[Pair]:
        return sorted(self.scores.keys())

    def score(self, a: Action, b: Action, r: AllenRelation) -> float:
        key = canonical_pair(a, b)
        if key not in self.scores:
            return 0.0
        if key == (a, b):
            return self.scores[key][r]
        return self.scores[key][INVERSE[r]]

    def top_relation(self, a: Action, b: Action) -> Tuple[AllenRelation, float]:
        best = max(RELATIONS, key=lambda r: (self.score(a, b, r), -r.index))
        return best, self.score(a, b, best)


def collect_timings(dataset: Dataset, pair: Pair) -> List[Timing3]:
    """One timing-space point per demonstration containing both actions."""
    a, b = pair
    out = []
    for demo in dataset.demonstrations:
        ta, tb = demo.find(a), demo.find(b)
        if ta is None or tb is None:
            continue
        out.append(embed_pair(ta.interval, tb.interval))
    if not out:
        raise PairNeverCoOccurs(f"'{a}' and '{b}' never co-occur")
    return out


def score_relation(dataset: Dataset, pair: Pair, r: AllenRelation,
                   eps: float = DEFAULT_EPS) -> float:
    """Mean fuzzy membership of ``r`` over co-occurring demonstrations."""
    a, b = pair
    vals = []
    for demo in dataset.demonstrations:
        ta, tb = demo.find(a), demo.find(b)
        if ta is None or tb is None:
            continue
        vals.append(relation_membership(ta.interval, tb.interval, r, eps))
    if not vals:
        raise PairNeverCoOccurs(f"'{a}' and '{b}' never co-occur")
    return float(np.mean(vals))


def assess_all(dataset: Dataset, eps: float = DEFAULT_EPS, k_max: int = 5,
               seed: int = 0) -> Tuple[RelationScoreTable, Dict[Pair, TimingModel]]:
    """Score all co-occurring pairs and fit their timing models.

    Pairs are processed in canonical (lexicographic) order and per-pair
    fitting seeds derive from (seed, pair index), so results are
    deterministic for a given dataset.
    """
    if not dataset.demonstrations:
        raise EmptyDataset("dataset has no demonstrations")
    actions = dataset.actions()
    table = RelationScoreTable()
    models: Dict[Pair, TimingModel] = {}
    never = []
    pair_list = [(a, b) for i, a in enumerate(actions) for b in actions[i + 1:]]
    for idx, pair in enumerate(pair_list):
        try:
            timings = collect_timings(dataset, pair)
        except PairNeverCoOccurs:
            never.append(pair)
            continue
        table.scores[pair] = {
            r: score_relation(dataset, pair, r, eps) for r in RELATIONS
        }
        table.co_occurrences[pair] = len(timings)
        models[pair] = fit_gmm(timings, k_max=k_max, seed=_pair_seed(seed, idx)).with_pair(pair)
    table.never_co_occurring = tuple(never)
    return table, models


def _pair_seed(seed: int, pair_index: int) -> int:
    return int(np.random.SeedSequence([seed, pair_index]).generate_state(1)[0])


def assessment_report(dataset: Dataset, table: RelationScoreTable,
                      models: Dict[Pair, TimingModel]) -> dict:
    pairs = []
    for pair in table.pairs():
        a, b = pair
        pairs.append({
            "first": {"verb": a.verb, "object": a.object},
            "second": {"verb": b.verb, "object": b.object},
            "n_co_occurrences": table.co_occurrences[pair],
            "scores": {r.value: table.scores[pair][r] for r in RELATIONS},
            "timing_model": model_to_dict(models[pair]),
        })
    return {
        "task": dataset.task,
        "n_demonstrations": len(dataset),
        "pairs": pairs,
        "never_co_occurring": [
            [{"verb": a.verb, "object": a.object},
             {"verb": b.verb, "object": b.object}]
            for a, b in table.never_co_occurring
        ],
    }
