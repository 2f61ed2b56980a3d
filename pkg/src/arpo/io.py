"""JSONL rollout records, grouping, and atomic output files."""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .advantage import RolloutGroup
from .errors import InputError
from .rewards import (
    KIND_TAGS,
    CognitiveDomain,
    GroundTruth,
    RewardBreakdown,
    RewardWeights,
    TaskKind,
    score_rollout,
)

_REQUIRED = ("prompt_id", "domain", "task_kind", "response", "ground_truth")
_OPTIONAL = ("kl", "ratio")


@dataclass(frozen=True)
class RolloutRecord:
    prompt_id: str
    domain: CognitiveDomain
    task_kind: TaskKind
    response: str
    ground_truth: GroundTruth
    kl: float = 0.0
    ratio: float | None = None
    line: int = 0


def _number(obj: Mapping, key: str, line: int) -> float | None:
    if key not in obj or obj[key] is None:
        return None
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise InputError(f"line {line}: '{key}' must be a finite number")
    return float(v)


def parse_record(obj: Any, line: int) -> RolloutRecord:
    if not isinstance(obj, dict):
        raise InputError(f"line {line}: record must be a JSON object")
    missing = [k for k in _REQUIRED if k not in obj]
    if missing:
        raise InputError(f"line {line}: missing field(s) {missing}")
    extra = sorted(set(obj) - set(_REQUIRED) - set(_OPTIONAL))
    if extra:
        raise InputError(f"line {line}: unknown field(s) {extra}")
    for key in ("prompt_id", "domain", "task_kind", "response"):
        if not isinstance(obj[key], str):
            raise InputError(f"line {line}: '{key}' must be a string")
    try:
        kind = TaskKind.parse(obj["task_kind"])
        domain = CognitiveDomain.parse(obj["domain"])
        gt = GroundTruth.from_json(obj["ground_truth"])
    except InputError as exc:
        raise InputError(f"line {line}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise InputError(f"line {line}: bad ground_truth: {exc}") from None
    if KIND_TAGS[kind] != gt.tag:
        raise InputError(f"line {line}: ground_truth type {gt.tag!r} does not fit task_kind {kind.value}")
    kl = _number(obj, "kl", line)
    return RolloutRecord(
        prompt_id=obj["prompt_id"],
        domain=domain,
        task_kind=kind,
        response=obj["response"],
        ground_truth=gt,
        kl=kl if kl is not None else 0.0,
        ratio=_number(obj, "ratio", line),
        line=line,
    )


def iter_jsonl(path: str | Path) -> Iterator[tuple[int, Any]]:
    """Yield ``(line_number, object)`` for every non-blank line."""
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for n, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                yield n, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise InputError(f"line {n}: malformed JSON ({exc.msg})") from None


def read_rollouts(path: str | Path) -> list[RolloutRecord]:
    return [parse_record(obj, n) for n, obj in iter_jsonl(path)]


def score_records(
    records: Iterable[RolloutRecord], weights: RewardWeights = RewardWeights(), box_variants=None
) -> list[RewardBreakdown]:
    kwargs = {} if box_variants is None else {"box_variants": box_variants}
    return [score_rollout(r.response, r.ground_truth, r.task_kind, weights, **kwargs) for r in records]


def group_records(
    records: list[RolloutRecord], rewards: list[float]
) -> list[RolloutGroup]:
    """Group scored records by prompt_id (first-appearance order).

    Every group must have at least two responses, a single domain, and the
    same size as every other group.
    """
    order: list[str] = []
    members: dict[str, list[int]] = {}
    for i, rec in enumerate(records):
        if rec.prompt_id not in members:
            order.append(rec.prompt_id)
            members[rec.prompt_id] = []
        members[rec.prompt_id].append(i)

    groups = []
    size = None
    for pid in order:
        idx = members[pid]
        if len(idx) < 2:
            raise InputError(f"prompt_id {pid!r}: group has {len(idx)} response(s), need >= 2")
        if size is None:
            size = len(idx)
        elif len(idx) != size:
            raise InputError(f"prompt_id {pid!r}: group size {len(idx)} differs from {size}")
        domains = {records[i].domain for i in idx}
        if len(domains) != 1:
            raise InputError(f"prompt_id {pid!r}: records disagree on domain")
        groups.append(
            RolloutGroup(
                prompt_id=pid,
                domain=records[idx[0]].domain,
                rewards=[rewards[i] for i in idx],
                kl=[records[i].kl for i in idx],
            )
        )
    return groups


def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=False, allow_nan=False)


def write_atomic(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: str | Path, rows: Iterable[Mapping]) -> None:
    write_atomic(path, "".join(dumps(r) + "\n" for r in rows))
