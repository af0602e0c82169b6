"""Core domain types: actions, demonstrations, plans, and the 13 Allen relations.

All types are immutable values; validation reports violations instead of
raising so that malformed data can still be inspected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Optional, Sequence, Tuple

Interval = Tuple[float, float]


class AllenRelation(Enum):
    """The 13 exhaustive, mutually exclusive relations between two intervals."""

    BEFORE = "before"
    AFTER = "after"
    MEETS = "meets"
    MET_BY = "met_by"
    OVERLAPS = "overlaps"
    OVERLAPPED_BY = "overlapped_by"
    STARTS = "starts"
    STARTED_BY = "started_by"
    DURING = "during"
    CONTAINS = "contains"
    FINISHES = "finishes"
    FINISHED_BY = "finished_by"
    EQUALS = "equals"

    @property
    def index(self) -> int:
        return _RELATION_INDEX[self]

    def __lt__(self, other: "AllenRelation") -> bool:
        return self.index < other.index


RELATIONS: Tuple[AllenRelation, ...] = (
    AllenRelation.BEFORE,
    AllenRelation.AFTER,
    AllenRelation.MEETS,
    AllenRelation.MET_BY,
    AllenRelation.OVERLAPS,
    AllenRelation.OVERLAPPED_BY,
    AllenRelation.STARTS,
    AllenRelation.STARTED_BY,
    AllenRelation.DURING,
    AllenRelation.CONTAINS,
    AllenRelation.FINISHES,
    AllenRelation.FINISHED_BY,
    AllenRelation.EQUALS,
)

_RELATION_INDEX = {r: i for i, r in enumerate(RELATIONS)}


@dataclass(frozen=True, order=True)
class Action:
    """A (verb, object) pair; the identity of a step within a task."""

    verb: str
    object: str

    def __post_init__(self):
        if not self.verb or not self.object:
            raise ValueError("verb and object must be non-empty")

    def __str__(self) -> str:
        return f"{self.verb} {self.object}"


@dataclass(frozen=True)
class TimeEnrichedAction:
    """An action together with its execution interval in seconds."""

    action: Action
    start: float
    end: float

    @property
    def interval(self) -> Interval:
        return (self.start, self.end)

    @property
    def length(self) -> float:
        return self.end - self.start

    @property
    def midpoint(self) -> float:
        return (self.start + self.end) / 2.0

    def shifted(self, offset: float) -> "TimeEnrichedAction":
        return TimeEnrichedAction(self.action, self.start + offset, self.end + offset)


@dataclass(frozen=True)
class ActionSequence:
    """Strictly ordered, non-overlapping actions of one hand."""

    items: Tuple[TimeEnrichedAction, ...]

    def __init__(self, items: Iterable[TimeEnrichedAction]):
        object.__setattr__(self, "items", tuple(items))

    def __iter__(self) -> Iterator[TimeEnrichedAction]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def shifted(self, offset: float) -> "ActionSequence":
        return ActionSequence(a.shifted(offset) for a in self.items)


@dataclass(frozen=True)
class Demonstration:
    """One observed two-hand execution of a task."""

    left: ActionSequence
    right: ActionSequence
    id: str = ""

    def __iter__(self) -> Iterator[TimeEnrichedAction]:
        yield from self.left
        yield from self.right

    def actions(self) -> Tuple[Action, ...]:
        return tuple(a.action for a in self)

    def find(self, action: Action) -> Optional[TimeEnrichedAction]:
        for a in self:
            if a.action == action:
                return a
        return None

    def shifted(self, offset: float) -> "Demonstration":
        return Demonstration(self.left.shifted(offset), self.right.shifted(offset), self.id)


@dataclass(frozen=True)
class TemporalPlan:
    """A two-hand plan; structurally identical to a demonstration.

    ``grid`` is the seconds-per-step unit while times are still on the
    integer grid of the symbolic planner, and None once parametrized.
    """

    left: ActionSequence
    right: ActionSequence
    grid: Optional[float] = None

    def __iter__(self) -> Iterator[TimeEnrichedAction]:
        yield from self.left
        yield from self.right

    def actions(self) -> Tuple[Action, ...]:
        return tuple(a.action for a in self)

    def find(self, action: Action) -> Optional[TimeEnrichedAction]:
        for a in self:
            if a.action == action:
                return a
        return None

    def as_demonstration(self, id: str = "plan") -> Demonstration:
        return Demonstration(self.left, self.right, id)


def _validate_sequence(seq: ActionSequence, hand: str, out: list) -> None:
    for a in seq:
        if not a.length > 0:
            out.append(f"{hand}: '{a.action}' has zero or negative length "
                       f"({a.start}..{a.end}); end must exceed start")
    for prev, cur in zip(seq.items, seq.items[1:]):
        if prev.end > cur.start:
            out.append(f"{hand}: '{prev.action}' and '{cur.action}' overlap "
                       f"({prev.end} > {cur.start}); one hand cannot do both")


def validate_demonstration(demo: Demonstration) -> list:
    """Check per-hand ordering and positive lengths.

    Returns a list of violation messages; empty iff the demonstration is
    well formed. Touching intervals (end == next start) are allowed.
    """
    out: list = []
    _validate_sequence(demo.left, "left", out)
    _validate_sequence(demo.right, "right", out)
    seen: dict = {}
    for a in demo:
        if a.action in seen:
            out.append(f"action '{a.action}' occurs more than once")
        seen[a.action] = True
    return out


def validate_plan(plan: TemporalPlan) -> list:
    """Same structural checks as for a demonstration."""
    return validate_demonstration(plan.as_demonstration())


def classify_relation(a: Interval, b: Interval, eps: float = 0.0) -> AllenRelation:
    """Classify the Allen relation between intervals ``a`` and ``b``.

    Keypoint comparisons treat |x - y| <= eps as equality; equality tests
    take precedence (equals, then the starts/finishes families, then
    meets/met-by, then the strict relations) so the result stays a function
    of the inputs. Swapped arguments always yield the inverse relation:
    the computation is canonicalized on the lexicographically smaller
    interval to make that exact even in degenerate near-tie cases.
    """
    a0, a1 = a
    b0, b1 = b
    if (b0, b1) < (a0, a1):
        return INVERSE[classify_relation(b, a, eps)]
    eq_start = abs(b0 - a0) <= eps
    eq_end = abs(b1 - a1) <= eps
    if eq_start and eq_end:
        return AllenRelation.EQUALS
    if eq_start:
        return AllenRelation.STARTS if a1 < b1 else AllenRelation.STARTED_BY
    if eq_end:
        return AllenRelation.FINISHES if a0 > b0 else AllenRelation.FINISHED_BY
    if abs(b0 - a1) <= eps:
        return AllenRelation.MEETS
    if abs(b1 - a0) <= eps:
        return AllenRelation.MET_BY
    if a1 < b0:
        return AllenRelation.BEFORE
    if b1 < a0:
        return AllenRelation.AFTER
    if a0 < b0:
        return AllenRelation.CONTAINS if b1 < a1 else AllenRelation.OVERLAPS
    return AllenRelation.DURING if a1 < b1 else AllenRelation.OVERLAPPED_BY


INVERSE = {
    AllenRelation.BEFORE: AllenRelation.AFTER,
    AllenRelation.AFTER: AllenRelation.BEFORE,
    AllenRelation.MEETS: AllenRelation.MET_BY,
    AllenRelation.MET_BY: AllenRelation.MEETS,
    AllenRelation.OVERLAPS: AllenRelation.OVERLAPPED_BY,
    AllenRelation.OVERLAPPED_BY: AllenRelation.OVERLAPS,
    AllenRelation.STARTS: AllenRelation.STARTED_BY,
    AllenRelation.STARTED_BY: AllenRelation.STARTS,
    AllenRelation.DURING: AllenRelation.CONTAINS,
    AllenRelation.CONTAINS: AllenRelation.DURING,
    AllenRelation.FINISHES: AllenRelation.FINISHED_BY,
    AllenRelation.FINISHED_BY: AllenRelation.FINISHES,
    AllenRelation.EQUALS: AllenRelation.EQUALS,
}
