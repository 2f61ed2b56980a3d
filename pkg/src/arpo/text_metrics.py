"""Word-level ROUGE-L and the length-penalized open-ended reward."""

from __future__ import annotations

import re
from typing import Sequence

from .errors import InputError

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation; punctuation is dropped."""
    return _WORD.findall(text.lower())


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            if x == y:
                cur.append(prev[j - 1] + 1)
            else:
                cur.append(max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l_f(pred: Sequence[str], ref: Sequence[str]) -> float:
    """Balanced ROUGE-L F1 over token sequences."""
    lcs = lcs_length(pred, ref)
    p = lcs / len(pred) if pred else 0.0
    r = lcs / len(ref) if ref else 0.0
    if p + r == 0.0:
        return 0.0
    return 2.0 * p * r / (p + r)


def length_penalty(pred_len: int, ref_len: int) -> float:
    """Penalize only answers longer than the reference: ``min(1, ref_len / pred_len)``."""
    if ref_len < 1:
        raise InputError("reference length must be >= 1")
    if pred_len <= ref_len:
        return 1.0
    return ref_len / pred_len


def open_ended_reward(pred: str, ref: str) -> float:
    pred_toks = tokenize(pred)
    ref_toks = tokenize(ref)
    if not ref_toks:
        return 0.0
    return rouge_l_f(pred_toks, ref_toks) * length_penalty(len(pred_toks), len(ref_toks))
