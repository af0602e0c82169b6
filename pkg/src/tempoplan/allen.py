"""Allen interval algebra: inverses, the 13x13 composition table, and the
geometry of each relation as a region of the 3-D timing space.

Every relation is a set of linear (in)equalities on (lam_a, lam_b, omega):
a line (equals), a plane region (the meets and starts/finishes families),
or a volume (the rest). The composition table below was generated by
exhaustive enumeration of interval triples on a small integer grid (every
endpoint ordering of three intervals is realizable there, so the
enumeration is complete); the test suite re-certifies it independently by
random sampling and witness construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from .errors import InfeasibleRegion
from .model import INVERSE, RELATIONS, AllenRelation
from .timing import SQRT2, Timing3

RelationSet = FrozenSet[AllenRelation]

FULL_SET: RelationSet = frozenset(RELATIONS)


def inverse(r: AllenRelation) -> AllenRelation:
    return INVERSE[r]


def inverse_set(rs) -> RelationSet:
    return frozenset(INVERSE[r] for r in rs)


# One row per relation of the first pair, one cell per relation of the
# second pair, relations coded b a m M o O s S d D f F e in enum order.
_CODES = "bamMoOsSdDfFe"
_TABLE_ROWS = (
    "b bamMoOsSdDfFe b bmosd b bmosd b b bmosd b bmosd b b",
    "bamMoOsSdDfFe a aMOdf a aMOdf a aMOdf a aMOdf a a a a",
    "b aMOSD b fFe b osd m m osd b osd b m",
    "bmoDF a sSe a Odf a Odf a Odf a M M M",
    "b aMOSD b OSD bmo oOsSdDfFe o oDF osd bmoDF osd bmo o",
    "bmoDF a oDF a oOsSdDfFe aMO Odf aMO Odf aMOSD O OSD O",
    "b a b M bmo Odf s sSe d bmoDF d bmo s",
    "bmoDF a oDF M oDF O sSe S Odf D O D S",
    "b a b a bmosd aMOdf d aMOdf d bamMoOsSdDfFe d bmosd d",
    "bmoDF aMOSD oDF OSD oDF OSD oDF D oOsSdDfFe D OSD D D",
    "b a m a osd aMO d aMO d aMOSD f fFe f",
    "b aMOSD m OSD o OSD o D osd D fFe F F",
    "b a m M o O s S d D f F e",
)

_CODE_TO_RELATION = {c: RELATIONS[i] for i, c in enumerate(_CODES)}


def _parse_table():
    by_set: Dict[Tuple[AllenRelation, AllenRelation], RelationSet] = {}
    by_mask = [[0] * 13 for _ in range(13)]
    for i, row in enumerate(_TABLE_ROWS):
        cells = row.split()
        assert len(cells) == 13
        for j, cell in enumerate(cells):
            rels = frozenset(_CODE_TO_RELATION[c] for c in cell)
            by_set[(RELATIONS[i], RELATIONS[j])] = rels
            by_mask[i][j] = sum(1 << r.index for r in rels)
    return by_set, by_mask


COMPOSITION_TABLE, COMPOSITION_MASKS = _parse_table()


def compose(r1: AllenRelation, r2: AllenRelation) -> RelationSet:
    """Relations possible between a and c given a r1 b and b r2 c."""
    return COMPOSITION_TABLE[(r1, r2)]


def mask_of(rs) -> int:
    return sum(1 << r.index for r in rs)


def set_of_mask(mask: int) -> RelationSet:
    return frozenset(r for r in RELATIONS if mask >> r.index & 1)


REGION_DIMENSION = {
    AllenRelation.EQUALS: 1,
    AllenRelation.MEETS: 2,
    AllenRelation.MET_BY: 2,
    AllenRelation.STARTS: 2,
    AllenRelation.STARTED_BY: 2,
    AllenRelation.FINISHES: 2,
    AllenRelation.FINISHED_BY: 2,
    AllenRelation.BEFORE: 3,
    AllenRelation.AFTER: 3,
    AllenRelation.OVERLAPS: 3,
    AllenRelation.OVERLAPPED_BY: 3,
    AllenRelation.DURING: 3,
    AllenRelation.CONTAINS: 3,
}


@dataclass(frozen=True)
class AllenRegion:
    """A relation and the dimensionality of its locus in timing space."""

    relation: AllenRelation

    @property
    def dimension(self) -> int:
        return REGION_DIMENSION[self.relation]


# Keypoint differences as linear forms of (lam_a, lam_b, omega). The sigma
# and delta helpers are shared with the projection snap so that a snapped
# point reproduces an exactly zero difference bit-for-bit.

def _sigma(lam_a: float, lam_b: float) -> float:
    """b_start - a_end gap baseline: half the summed physical lengths."""
    return (lam_a + lam_b) / SQRT2


def _delta(lam_a: float, lam_b: float) -> float:
    """Half the physical length difference (b minus a)."""
    return (lam_b - lam_a) / SQRT2


def _diffs(t: Timing3) -> Tuple[float, float, float, float]:
    sig = _sigma(t.lam_a, t.lam_b)
    del_ = _delta(t.lam_a, t.lam_b)
    d_start = t.omega - del_   # b_start - a_start
    d_end = t.omega + del_     # b_end - a_end
    d_meet = t.omega - sig     # b_start - a_end
    d_metby = t.omega + sig    # b_end - a_start
    return d_start, d_end, d_meet, d_metby


def region_classify(t: Timing3, eps: float = 0.0) -> AllenRelation:
    """Classify a timing-space point by the linear region predicates.

    Mirrors ``classify_relation`` on any lifted representative, including
    the eps-softened equality precedence and the swap canonicalization.
    """
    d_start, d_end, d_meet, d_metby = _diffs(t)
    if (d_start, d_end) < (0.0, 0.0):
        swapped = Timing3(t.lam_b, t.lam_a, -t.omega)
        return INVERSE[region_classify(swapped, eps)]
    eq_start = abs(d_start) <= eps
    eq_end = abs(d_end) <= eps
    if eq_start and eq_end:
        return AllenRelation.EQUALS
    if eq_start:
        return AllenRelation.STARTS if d_end > 0 else AllenRelation.STARTED_BY
    if eq_end:
        return AllenRelation.FINISHES if d_start < 0 else AllenRelation.FINISHED_BY
    if abs(d_meet) <= eps:
        return AllenRelation.MEETS
    if abs(d_metby) <= eps:
        return AllenRelation.MET_BY
    if d_meet > 0:
        return AllenRelation.BEFORE
    if d_metby < 0:
        return AllenRelation.AFTER
    if d_start > 0:
        return AllenRelation.CONTAINS if d_end < 0 else AllenRelation.OVERLAPS
    return AllenRelation.DURING if d_end > 0 else AllenRelation.OVERLAPPED_BY


def region_contains(t: Timing3, r: AllenRelation, eps: float = 0.0) -> bool:
    """True iff any lifted representative of ``t`` classifies as ``r``.

    Exact boundary membership (eps = 0 for the equality relations) needs
    exactly-zero linear forms, as produced by ``region_project``.
    """
    return region_classify(t, eps) == r


# Projection. Constraint rows act on x = (lam_a, lam_b, omega); every
# region is {x | E x = 0, G x >= margin} plus physical length floors.

_ROW_START = np.array([1 / SQRT2, -1 / SQRT2, 1.0])    # d_start = omega - delta
_ROW_END = np.array([-1 / SQRT2, 1 / SQRT2, 1.0])      # d_end = omega + delta
_ROW_MEET = np.array([-1 / SQRT2, -1 / SQRT2, 1.0])    # d_meet
_ROW_METBY = np.array([1 / SQRT2, 1 / SQRT2, 1.0])     # d_metby
_ROW_LAM_A = np.array([1.0, 0.0, 0.0])
_ROW_LAM_B = np.array([0.0, 1.0, 0.0])

# (equality rows, inequality rows with sense +1 for >= margin / -1 for <= -margin)
_REGION_CONSTRAINTS: Dict[AllenRelation, Tuple[list, list]] = {
    AllenRelation.BEFORE: ([], [(_ROW_MEET, +1)]),
    AllenRelation.AFTER: ([], [(_ROW_METBY, -1)]),
    AllenRelation.MEETS: ([_ROW_MEET], []),
    AllenRelation.MET_BY: ([_ROW_METBY], []),
    AllenRelation.OVERLAPS: ([], [(_ROW_START, +1), (_ROW_END, +1), (_ROW_MEET, -1)]),
    AllenRelation.OVERLAPPED_BY: ([], [(_ROW_START, -1), (_ROW_END, -1), (_ROW_METBY, +1)]),
    AllenRelation.STARTS: ([_ROW_START], [(_ROW_END, +1)]),
    AllenRelation.STARTED_BY: ([_ROW_START], [(_ROW_END, -1)]),
    AllenRelation.FINISHES: ([_ROW_END], [(_ROW_START, -1)]),
    AllenRelation.FINISHED_BY: ([_ROW_END], [(_ROW_START, +1)]),
    AllenRelation.DURING: ([], [(_ROW_START, -1), (_ROW_END, +1)]),
    AllenRelation.CONTAINS: ([], [(_ROW_START, +1), (_ROW_END, -1)]),
    AllenRelation.EQUALS: ([_ROW_START, _ROW_END], []),
}

_LENGTH_FLOOR = 1e-9


def _region_system(r: AllenRelation, margin: float):
    """Stack the region of ``r`` as (A_eq, A_in, b_in) with A_in x >= b_in."""
    eq_rows, in_rows = _REGION_CONSTRAINTS[r]
    a_eq = np.array(eq_rows).reshape(len(eq_rows), 3)
    rows = [row * sense for row, sense in in_rows]
    rhs = [margin] * len(rows)
    lam_floor = max(margin, _LENGTH_FLOOR) / SQRT2
    rows += [_ROW_LAM_A, _ROW_LAM_B]
    rhs += [lam_floor, lam_floor]
    return a_eq, np.array(rows), np.array(rhs)


def _snap(x: np.ndarray, r: AllenRelation) -> Timing3:
    """Re-impose the region's equalities in closed form so they hold exactly."""
    lam_a, lam_b, omega = float(x[0]), float(x[1]), float(x[2])
    if r is AllenRelation.EQUALS:
        lam = (lam_a + lam_b) / 2.0
        return Timing3(lam, lam, 0.0)
    if r is AllenRelation.MEETS:
        return Timing3(lam_a, lam_b, _sigma(lam_a, lam_b))
    if r is AllenRelation.MET_BY:
        return Timing3(lam_a, lam_b, -_sigma(lam_a, lam_b))
    if r in (AllenRelation.STARTS, AllenRelation.STARTED_BY):
        return Timing3(lam_a, lam_b, _delta(lam_a, lam_b))
    if r in (AllenRelation.FINISHES, AllenRelation.FINISHED_BY):
        return Timing3(lam_a, lam_b, -_delta(lam_a, lam_b))
    return Timing3(lam_a, lam_b, omega)


class _ProjectionMaps:
    """Per-(relation, margin) affine maps x -> P x + c, one per active set.

    Projection onto a convex polyhedron equals the closest feasible
    candidate among the equality-constrained projections over all subsets
    of inequality rows, which lets a whole batch of points be projected
    with a handful of matrix products.
    """

    def __init__(self, r: AllenRelation, margin: float):
        a_eq, a_in, b_in = _region_system(r, margin)
        self.a_in, self.b_in = a_in, b_in
        self.maps: List[Tuple[np.ndarray, np.ndarray]] = []
        n_in = len(b_in)
        for subset in range(1 << n_in):
            rows = [a_eq[i] for i in range(len(a_eq))]
            rhs = [0.0] * len(a_eq)
            for i in range(n_in):
                if subset >> i & 1:
                    rows.append(a_in[i])
                    rhs.append(b_in[i])
            if not rows:
                self.maps.append((np.eye(3), np.zeros(3)))
                continue
            a = np.array(rows)
            b = np.array(rhs)
            gram = a @ a.T
            if np.linalg.matrix_rank(gram) < len(rows):
                continue  # redundant subset; covered by an independent one
            pinv = a.T @ np.linalg.inv(gram)
            self.maps.append((np.eye(3) - pinv @ a, pinv @ b))

    def project_batch(self, pts: np.ndarray) -> np.ndarray:
        """Project each row of ``pts``; raises if any point has no feasible map."""
        best = np.full(pts.shape, np.nan)
        best_d2 = np.full(len(pts), np.inf)
        tol = 1e-9
        for p, c in self.maps:
            cand = pts @ p.T + c
            feas = np.all(cand @ self.a_in.T >= self.b_in - tol, axis=1)
            d2 = np.sum((cand - pts) ** 2, axis=1)
            better = feas & (d2 < best_d2)
            best[better] = cand[better]
            best_d2[better] = d2[better]
        if np.isinf(best_d2).any():
            raise InfeasibleRegion("region admits no feasible projection")
        return best


_PROJECTION_CACHE: Dict[Tuple[AllenRelation, float], _ProjectionMaps] = {}


def _projection_maps(r: AllenRelation, margin: float) -> _ProjectionMaps:
    key = (r, margin)
    if key not in _PROJECTION_CACHE:
        _PROJECTION_CACHE[key] = _ProjectionMaps(r, margin)
    return _PROJECTION_CACHE[key]


def region_project(t: Timing3, r: AllenRelation, margin: float = 0.0) -> Timing3:
    """Euclidean-closest point of the region of ``r``.

    Equality constraints are met exactly; strict inequalities are tightened
    to slack >= margin, and physical lengths are floored at max(margin,
    1e-9). For margin > 0 the result satisfies ``region_contains`` with
    eps = 0.
    """
    if margin < 0:
        raise ValueError("margin must be non-negative")
    out = region_project_batch(np.array([t.as_array()]), r, margin)
    return out[0]


def region_project_batch(pts: np.ndarray, r: AllenRelation, margin: float = 0.0) -> List[Timing3]:
    projected = _projection_maps(r, margin).project_batch(np.asarray(pts, dtype=float))
    return [_snap(row, r) for row in projected]
