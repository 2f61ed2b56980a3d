"""Task-aware reward scoring.

Each rollout carries one :class:`TaskKind`. A response is first parsed into a
typed payload, then scored on three axes (task accuracy, spatial consistency,
format validity) that are combined with fixed non-negative weights::

    r = w_task * r_task + w_spatial * r_spatial + w_fmt * r_fmt

A response that fails to parse, or whose payload violates its type invariants,
scores 0 on every axis.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping, Sequence

from .errors import InputError
from .geometry import Box2D, BoxVariant, bbox_reward, iou, is_valid_box
from .text_metrics import open_ended_reward, tokenize


class TaskKind(str, Enum):
    SingleChoice = "SingleChoice"
    MultiChoice = "MultiChoice"
    Counting = "Counting"
    BBox = "BBox"
    Boundary = "Boundary"
    OpenEnded = "OpenEnded"
    OrdinalShortAnswer = "OrdinalShortAnswer"
    TripletShortAnswer = "TripletShortAnswer"

    @classmethod
    def parse(cls, name: str) -> "TaskKind":
        try:
            return cls(name)
        except ValueError:
            raise InputError(f"unknown task_kind {name!r}") from None


class CognitiveDomain(str, Enum):
    SpatialPerception = "SpatialPerception"
    ObjectUnderstanding = "ObjectUnderstanding"
    SceneUnderstanding = "SceneUnderstanding"
    SceneReasoning = "SceneReasoning"

    @property
    def code(self) -> str:
        return _DOMAIN_CODES[self]

    @classmethod
    def parse(cls, name: str) -> "CognitiveDomain":
        """Accept the full name or the two-letter code (SP, OU, SU, SR)."""
        for d in cls:
            if name in (d.value, _DOMAIN_CODES[d]):
                return d
        raise InputError(f"unknown domain {name!r}")


_DOMAIN_CODES = {
    CognitiveDomain.SpatialPerception: "SP",
    CognitiveDomain.ObjectUnderstanding: "OU",
    CognitiveDomain.SceneUnderstanding: "SU",
    CognitiveDomain.SceneReasoning: "SR",
}

SPATIAL_KINDS = frozenset({TaskKind.BBox, TaskKind.Boundary})

# Which IoU rule scores the task axis of each box-valued kind.
DEFAULT_BOX_VARIANTS: Mapping[TaskKind, BoxVariant] = {
    TaskKind.BBox: "bonus",
    TaskKind.Boundary: "plain",
}

# ground-truth tag expected for each task kind
KIND_TAGS: Mapping[TaskKind, str] = {
    TaskKind.SingleChoice: "choice",
    TaskKind.MultiChoice: "letters",
    TaskKind.Counting: "count",
    TaskKind.BBox: "box",
    TaskKind.Boundary: "box",
    TaskKind.OpenEnded: "text",
    TaskKind.OrdinalShortAnswer: "ordinal",
    TaskKind.TripletShortAnswer: "triplets",
}

Triplet = tuple[str, str, str]


def _norm_phrase(s: str) -> str:
    return " ".join(tokenize(s))


def _norm_triplet(t: Sequence[str]) -> Triplet:
    if len(t) != 3:
        raise InputError(f"triplet needs 3 fields, got {len(t)}")
    a, b, c = (_norm_phrase(str(x)) for x in t)
    return (a, b, c)


@dataclass(frozen=True)
class GroundTruth:
    """Tagged ground-truth value.

    ``tag`` is one of ``choice``, ``letters``, ``count``, ``box``, ``text``,
    ``ordinal`` or ``triplets``. Ordinal targets carry the scale size and,
    optionally, the ordered stage labels.
    """

    tag: str
    value: Any
    scale: int | None = None
    stages: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        tag, v = self.tag, self.value
        if tag == "choice":
            if not (isinstance(v, str) and len(v) == 1 and v.isalpha()):
                raise InputError(f"choice ground truth must be a single letter, got {v!r}")
            object.__setattr__(self, "value", v.upper())
        elif tag == "letters":
            letters = frozenset(str(x).upper() for x in v)
            if not letters or not all(len(x) == 1 and x.isalpha() for x in letters):
                raise InputError(f"letters ground truth must be a nonempty letter set, got {v!r}")
            object.__setattr__(self, "value", letters)
        elif tag == "count":
            if isinstance(v, bool) or not isinstance(v, int):
                raise InputError(f"count ground truth must be an integer, got {v!r}")
        elif tag == "box":
            if not isinstance(v, Box2D):
                object.__setattr__(self, "value", Box2D.from_seq(v))
        elif tag == "text":
            if not isinstance(v, str):
                raise InputError("text ground truth must be a string")
        elif tag == "ordinal":
            stages = tuple(self.stages) if self.stages is not None else None
            scale = self.scale if self.scale is not None else (len(stages) if stages else None)
            if scale is None or scale < 2:
                raise InputError("ordinal ground truth needs a scale size >= 2")
            if stages is not None and len(stages) != scale:
                raise InputError("ordinal stage labels must match the scale size")
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v < scale:
                raise InputError(f"ordinal index {v!r} outside [0, {scale - 1}]")
            object.__setattr__(self, "scale", scale)
            object.__setattr__(self, "stages", stages)
        elif tag == "triplets":
            trips = frozenset(_norm_triplet(t) for t in v)
            if not trips:
                raise InputError("triplet ground truth must be nonempty")
            object.__setattr__(self, "value", trips)
        else:
            raise InputError(f"unknown ground-truth tag {tag!r}")

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "GroundTruth":
        if not isinstance(obj, Mapping) or "type" not in obj or "value" not in obj:
            raise InputError("ground_truth must be an object with 'type' and 'value'")
        extra = set(obj) - {"type", "value", "scale", "stages"}
        if extra:
            raise InputError(f"unknown ground_truth fields: {sorted(extra)}")
        stages = obj.get("stages")
        return cls(
            tag=obj["type"],
            value=obj["value"],
            scale=obj.get("scale"),
            stages=tuple(stages) if stages is not None else None,
        )

    def to_json(self) -> dict[str, Any]:
        out: dict[str, Any] = {"type": self.tag}
        if self.tag == "letters":
            out["value"] = sorted(self.value)
        elif self.tag == "box":
            out["value"] = self.value.as_list()
        elif self.tag == "triplets":
            out["value"] = [list(t) for t in sorted(self.value)]
        else:
            out["value"] = self.value
        if self.tag == "ordinal":
            out["scale"] = self.scale
            if self.stages is not None:
                out["stages"] = list(self.stages)
        return out


@dataclass(frozen=True)
class ParsedResponse:
    raw: str
    tag: str
    payload: Any = None
    parse_ok: bool = False


@dataclass(frozen=True)
class RewardWeights:
    task: float = 0.8
    spatial: float = 0.1
    fmt: float = 0.1

    def __post_init__(self) -> None:
        for name in ("task", "spatial", "fmt"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise InputError(f"reward weight {name}={v} must be finite and >= 0")

    @classmethod
    def parse(cls, text: str) -> "RewardWeights":
        """Parse ``"0.8,0.1,0.1"``."""
        parts = text.split(",")
        if len(parts) != 3:
            raise InputError(f"weights need 3 comma-separated values, got {text!r}")
        try:
            return cls(*(float(p) for p in parts))
        except ValueError:
            raise InputError(f"weights are not numbers: {text!r}") from None


@dataclass(frozen=True)
class RewardBreakdown:
    r_task: float
    r_spatial: float
    r_fmt: float
    r_total: float

    def to_json(self) -> dict[str, float]:
        return {
            "r_task": self.r_task,
            "r_spatial": self.r_spatial,
            "r_fmt": self.r_fmt,
            "r_total": self.r_total,
        }


# --- parsing ---------------------------------------------------------------

_UPPER_LETTER = re.compile(r"(?<![A-Za-z])([A-Z])(?![A-Za-z])")
_ANY_LETTER = re.compile(r"(?<![A-Za-z])([A-Za-z])(?![A-Za-z])")
_INTEGER = re.compile(r"-?\d+")
_NUM = r"\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*"
_BOX = re.compile(r"[\[(]" + ",".join([_NUM] * 4) + r"[\])]")
_PAREN = re.compile(r"\(([^()]*)\)")


def _letters(text: str) -> list[str]:
    found = _UPPER_LETTER.findall(text)
    if not found:
        found = [x.upper() for x in _ANY_LETTER.findall(text)]
    return found


def _find_stage(text: str, stages: Sequence[str]) -> int | None:
    toks = tokenize(text)
    best: tuple[int, int, int] | None = None  # (position, -length, index)
    for idx, label in enumerate(stages):
        lab = tokenize(label)
        if not lab:
            continue
        for pos in range(len(toks) - len(lab) + 1):
            if toks[pos : pos + len(lab)] == lab:
                cand = (pos, -len(lab), idx)
                if best is None or cand < best:
                    best = cand
                break
    return None if best is None else best[2]


def parse_response(
    text: str, kind: TaskKind, stages: Sequence[str] | None = None
) -> ParsedResponse:
    """Extract the answer payload for ``kind``. Failure is returned, never raised."""
    tag = KIND_TAGS[kind]
    payload: Any = None
    if kind is TaskKind.SingleChoice:
        letters = _letters(text)
        payload = letters[0] if letters else None
    elif kind is TaskKind.MultiChoice:
        letters = _letters(text)
        payload = frozenset(letters) if letters else None
    elif kind is TaskKind.Counting:
        m = _INTEGER.search(text)
        payload = int(m.group()) if m else None
    elif kind in SPATIAL_KINDS:
        m = _BOX.search(text)
        payload = tuple(float(g) for g in m.groups()) if m else None
    elif kind is TaskKind.OpenEnded:
        payload = text if tokenize(text) else None
    elif kind is TaskKind.OrdinalShortAnswer:
        idx = _find_stage(text, stages) if stages else None
        if idx is None:
            m = _INTEGER.search(text)
            idx = int(m.group()) if m else None
        payload = idx
    elif kind is TaskKind.TripletShortAnswer:
        trips = set()
        for inner in _PAREN.findall(text):
            parts = inner.split(",")
            if len(parts) == 3 and all(tokenize(p) for p in parts):
                trips.add(_norm_triplet(parts))
        payload = frozenset(trips) if trips else None
    return ParsedResponse(raw=text, tag=tag, payload=payload, parse_ok=payload is not None)


# --- task scorers ----------------------------------------------------------


def score_single_choice(pred: str, gt: str) -> float:
    return 1.0 if pred.upper() == gt.upper() else 0.0


def score_counting(pred: int, gt: int) -> float:
    return max(0.0, 1.0 - abs(pred - gt) / max(abs(gt), 1))


def score_multi_choice(pred: Sequence[str] | frozenset[str], gt: Sequence[str] | frozenset[str]) -> float:
    """Geometric mean of set-IoU and recall."""
    p = {x.upper() for x in pred}
    g = {x.upper() for x in gt}
    if not g:
        raise InputError("multi-choice ground truth is empty")
    if not p:
        return 0.0
    inter = len(p & g)
    return math.sqrt((inter / len(p | g)) * (inter / len(g)))


def score_ordinal(pred_idx: int, gt_idx: int, scale: int) -> float:
    if scale < 2:
        raise InputError(f"ordinal scale must be >= 2, got {scale}")
    for name, v in (("pred_idx", pred_idx), ("gt_idx", gt_idx)):
        if not 0 <= v < scale:
            raise InputError(f"{name}={v} outside [0, {scale - 1}]")
    return 1.0 - abs(pred_idx - gt_idx) / (scale - 1)


def score_triplets(pred: frozenset[Triplet] | set[Triplet], gt: frozenset[Triplet] | set[Triplet]) -> float:
    """F1 over exactly matching (entity, attribute, value) triplets."""
    if not gt:
        raise InputError("triplet ground truth is empty")
    if not pred:
        return 0.0
    return 2.0 * len(set(pred) & set(gt)) / (len(pred) + len(gt))


# --- auxiliary scorers -----------------------------------------------------


def _payload_valid(resp: ParsedResponse, kind: TaskKind, gt: GroundTruth | None) -> bool:
    if not resp.parse_ok:
        return False
    p = resp.payload
    if kind in SPATIAL_KINDS:
        return is_valid_box(p)
    if kind is TaskKind.Counting:
        return p >= 0
    if kind is TaskKind.OrdinalShortAnswer:
        if p < 0:
            return False
        return gt is None or p < gt.scale
    return True


def score_format(resp: ParsedResponse, kind: TaskKind, gt: GroundTruth | None = None) -> float:
    """1.0 iff the response parsed and its payload satisfies its type invariants.

    Passing ``gt`` additionally range-checks ordinal indices against the scale.
    """
    return 1.0 if _payload_valid(resp, kind, gt) else 0.0


def score_spatial(resp: ParsedResponse, gt: GroundTruth, kind: TaskKind) -> float:
    if kind not in SPATIAL_KINDS or not _payload_valid(resp, kind, gt):
        return 0.0
    return iou(Box2D.from_seq(resp.payload), gt.value)


def combine(r_task: float, r_spatial: float, r_fmt: float, w: RewardWeights = RewardWeights()) -> float:
    if min(w.task, w.spatial, w.fmt) < 0:
        raise InputError("reward weights must be non-negative")
    return w.task * r_task + w.spatial * r_spatial + w.fmt * r_fmt


def _task_reward(
    resp: ParsedResponse, gt: GroundTruth, kind: TaskKind, box_variants: Mapping[TaskKind, BoxVariant]
) -> float:
    p = resp.payload
    if kind is TaskKind.SingleChoice:
        return score_single_choice(p, gt.value)
    if kind is TaskKind.MultiChoice:
        return score_multi_choice(p, gt.value)
    if kind is TaskKind.Counting:
        return score_counting(p, gt.value)
    if kind in SPATIAL_KINDS:
        return bbox_reward(Box2D.from_seq(p), gt.value, box_variants[kind])
    if kind is TaskKind.OpenEnded:
        return open_ended_reward(p, gt.value)
    if kind is TaskKind.OrdinalShortAnswer:
        return score_ordinal(p, gt.value, gt.scale)
    return score_triplets(p, gt.value)


def score_rollout(
    text: str,
    gt: GroundTruth,
    kind: TaskKind,
    w: RewardWeights = RewardWeights(),
    box_variants: Mapping[TaskKind, BoxVariant] = DEFAULT_BOX_VARIANTS,
) -> RewardBreakdown:
    if KIND_TAGS[kind] != gt.tag:
        raise InputError(f"ground truth tag {gt.tag!r} does not match task kind {kind.value}")
    resp = parse_response(text, kind, stages=gt.stages)
    if not _payload_valid(resp, kind, gt):
        return RewardBreakdown(0.0, 0.0, 0.0, combine(0.0, 0.0, 0.0, w))
    r_task = _task_reward(resp, gt, kind, box_variants)
    r_spatial = score_spatial(resp, gt, kind)
    r_fmt = 1.0
    return RewardBreakdown(r_task, r_spatial, r_fmt, combine(r_task, r_spatial, r_fmt, w))
