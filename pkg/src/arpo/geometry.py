"""Axis-aligned boxes in normalized image coordinates and IoU scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

from .errors import InputError

BoxVariant = Literal["plain", "bonus"]

IOU_BONUS = 0.5
IOU_BONUS_THRESHOLD = 0.5


@dataclass(frozen=True)
class Box2D:
    """Closed box ``[x_min, x_max] x [y_min, y_max]`` inside the unit square."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise InputError(f"box coordinate {name}={v!r} is not a finite number")
            if not 0.0 <= v <= 1.0:
                raise InputError(f"box coordinate {name}={v} outside [0, 1]")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise InputError(f"box has min > max: {self.as_list()}")

    @classmethod
    def from_seq(cls, values: Sequence[float]) -> "Box2D":
        if len(values) != 4:
            raise InputError(f"box needs 4 coordinates, got {len(values)}")
        return cls(*(float(v) for v in values))

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)

    def as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]


def is_valid_box(values: Sequence[float]) -> bool:
    try:
        Box2D.from_seq(values)
    except (InputError, TypeError, ValueError):
        return False
    return True


def iou(a: Box2D, b: Box2D) -> float:
    """Intersection over union; 0 when both boxes are degenerate."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(iw, 0.0) * max(ih, 0.0)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return min(max(inter / union, 0.0), 1.0)


def bbox_reward(pred: Box2D, gt: Box2D, variant: BoxVariant = "bonus") -> float:
    """IoU reward. The ``bonus`` variant adds 0.5 once IoU strictly exceeds 0.5, capped at 1."""
    score = iou(pred, gt)
    if variant == "plain":
        return score
    if variant == "bonus":
        if score > IOU_BONUS_THRESHOLD:
            return min(score + IOU_BONUS, 1.0)
        return score
    raise InputError(f"unknown box reward variant {variant!r}")
