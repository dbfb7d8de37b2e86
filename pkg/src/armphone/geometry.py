"""Pixel rectangles and rounding helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

Point = tuple[float, float]


def round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


@dataclass(frozen=True)
class BBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate bbox {self.as_list()}")

    @classmethod
    def from_seq(cls, seq: Sequence[float]) -> "BBox":
        if len(seq) != 4:
            raise ValueError(f"bbox needs 4 numbers, got {len(seq)}")
        return cls(*seq)

    def as_list(self) -> list:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def contains(self, p: Point) -> bool:
        return self.x_min <= p[0] <= self.x_max and self.y_min <= p[1] <= self.y_max

    def within(self, width: float, height: float) -> bool:
        return self.x_min >= 0 and self.y_min >= 0 and self.x_max <= width and self.y_max <= height

    def inside(self, other: "BBox") -> bool:
        return (
            self.x_min >= other.x_min
            and self.y_min >= other.y_min
            and self.x_max <= other.x_max
            and self.y_max <= other.y_max
        )


def center_of(bbox: BBox) -> tuple[int, int]:
    """Contact point for a grounded element: bbox center, rounded half-up."""
    return (
        round_half_up((bbox.x_min + bbox.x_max) / 2),
        round_half_up((bbox.y_min + bbox.y_max) / 2),
    )


def in_screen(p: Point, dims: tuple[int, int]) -> bool:
    """Half-open screen bounds: 0 <= x < W, 0 <= y < H."""
    return 0 <= p[0] < dims[0] and 0 <= p[1] < dims[1]


def fmt_num(v: float) -> str:
    """Integers print bare; other floats use their round-trippable repr."""
    if float(v).is_integer():
        return str(int(v))
    return repr(float(v))
