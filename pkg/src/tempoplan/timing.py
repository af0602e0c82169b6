"""The 3-D timing space: lengths scaled by 1/sqrt(2) plus midpoint offset.

A pair timing has two equivalent forms: the four raw keypoints (Timing4)
and the quotient-space point (Timing3) obtained by modding out uniform
shifts of all four keypoints. The 1/sqrt(2) length scaling makes the
Euclidean norm in the 3-D space equal the shift-minimized 4-D norm, so
distances between timings are meaningful.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Timing4:
    """Raw keypoints of an action pair: both starts and ends, in seconds."""

    a_start: float
    a_end: float
    b_start: float
    b_end: float

    @property
    def a(self) -> Tuple[float, float]:
        return (self.a_start, self.a_end)

    @property
    def b(self) -> Tuple[float, float]:
        return (self.b_start, self.b_end)

    def as_array(self) -> np.ndarray:
        return np.array([self.a_start, self.a_end, self.b_start, self.b_end])


@dataclass(frozen=True)
class Timing3:
    """Shift-invariant timing: scaled lengths and midpoint offset."""

    lam_a: float
    lam_b: float
    omega: float

    def as_array(self) -> np.ndarray:
        return np.array([self.lam_a, self.lam_b, self.omega])

    @staticmethod
    def from_array(v) -> "Timing3":
        return Timing3(float(v[0]), float(v[1]), float(v[2]))

    @property
    def length_a(self) -> float:
        """Physical length of the first action in seconds."""
        return self.lam_a * SQRT2

    @property
    def length_b(self) -> float:
        return self.lam_b * SQRT2


def embed(t: Timing4) -> Timing3:
    """Map raw keypoints to the 3-D timing space.

    Uniformly shifted keypoint vectors map to the same point, and the
    Euclidean norm of the result equals min over shifts of the shifted
    4-D keypoint norm.
    """
    lam_a = (t.a_end - t.a_start) / SQRT2
    lam_b = (t.b_end - t.b_start) / SQRT2
    omega = (t.b_start + t.b_end) / 2.0 - (t.a_start + t.a_end) / 2.0
    return Timing3(lam_a, lam_b, omega)


def embed_pair(a: Tuple[float, float], b: Tuple[float, float]) -> Timing3:
    return embed(Timing4(a[0], a[1], b[0], b[1]))


def lift(t: Timing3, anchor_a_start: float = 0.0) -> Timing4:
    """Pick the representative of ``t`` whose first action starts at the anchor."""
    len_a = t.lam_a * SQRT2
    len_b = t.lam_b * SQRT2
    a_start = anchor_a_start
    a_end = a_start + len_a
    mid_b = (a_start + a_end) / 2.0 + t.omega
    return Timing4(a_start, a_end, mid_b - len_b / 2.0, mid_b + len_b / 2.0)


def distance(t1: Timing3, t2: Timing3) -> float:
    """Euclidean distance in timing space.

    Equals the minimum over uniform shifts of the 4-D keypoint difference
    norm between any representatives of the two timings.
    """
    return math.sqrt(
        (t2.lam_a - t1.lam_a) ** 2
        + (t2.lam_b - t1.lam_b) ** 2
        + (t2.omega - t1.omega) ** 2
    )
