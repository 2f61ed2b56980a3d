"""View-conditioned meta-net over an (N, D) matrix of visual tokens.

Forward map::

    c  = mean over rows of X              (D,)
    h  = relu(W1 @ c)                     (D // r,)
    b  = W2 @ h                           (D,)
    X' = X + b                            broadcast to every row

``W2`` starts at zero, so a freshly initialized net is an exact identity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError


@dataclass
class MetaNetParams:
    w1: np.ndarray  # (D // r, D)
    w2: np.ndarray  # (D, D // r)
    ratio: int

    def __post_init__(self) -> None:
        self.w1 = np.asarray(self.w1, dtype=np.float64)
        self.w2 = np.asarray(self.w2, dtype=np.float64)
        h, d = self.w1.shape
        if self.w2.shape != (d, h):
            raise InputError(f"W2 shape {self.w2.shape} does not match W1 shape {self.w1.shape}")
        if d % self.ratio or d // self.ratio != h:
            raise InputError(f"hidden width {h} != D / r = {d} / {self.ratio}")

    @property
    def dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def num_params(self) -> int:
        return self.w1.size + self.w2.size

    def to_json(self) -> dict:
        return {
            "D": self.dim,
            "r": self.ratio,
            "W1": self.w1.ravel().tolist(),
            "W2": self.w2.ravel().tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MetaNetParams":
        d, r = int(obj["D"]), int(obj["r"])
        if r < 1 or d % r:
            raise InputError(f"D={d} is not divisible by r={r}")
        h = d // r
        w1 = np.array(obj["W1"], dtype=np.float64)
        w2 = np.array(obj["W2"], dtype=np.float64)
        if w1.size != h * d or w2.size != d * h:
            raise InputError("serialized weight sizes do not match D and r")
        return cls(w1.reshape(h, d), w2.reshape(d, h), r)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path: str | Path) -> "MetaNetParams":
        return cls.from_json(json.loads(Path(path).read_text()))


@dataclass
class VcmnGradients:
    dw1: np.ndarray
    dw2: np.ndarray
    dx: np.ndarray


def init_params(dim: int, ratio: int = 16, seed: int = 0) -> MetaNetParams:
    """W1 ~ U[-1/sqrt(D), 1/sqrt(D)] from ``seed``; W2 = 0."""
    if ratio < 1 or dim < 1 or dim % ratio:
        raise InputError(f"D={dim} is not divisible by r={ratio}")
    h = dim // ratio
    bound = 1.0 / np.sqrt(dim)
    w1 = np.random.default_rng(seed).uniform(-bound, bound, size=(h, dim))
    return MetaNetParams(w1, np.zeros((dim, h)), ratio)


def _as_tokens(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
        raise InputError(f"token matrix must be (N >= 1, D >= 1), got shape {x.shape}")
    return x


def gap(x) -> np.ndarray:
    # fsum is correctly rounded, so the result does not depend on row order
    x = _as_tokens(x)
    return np.array([math.fsum(col) for col in x.T]) / x.shape[0]


def meta_forward(p: MetaNetParams, c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64)
    if c.shape != (p.dim,):
        raise InputError(f"context has shape {c.shape}, expected ({p.dim},)")
    return p.w2 @ np.maximum(p.w1 @ c, 0.0)


def inject(x, b) -> np.ndarray:
    x = _as_tokens(x)
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (x.shape[1],):
        raise InputError(f"bias has shape {b.shape}, expected ({x.shape[1]},)")
    return x + b


def vcmn_forward(p: MetaNetParams, x) -> np.ndarray:
    x = _as_tokens(x)
    return inject(x, meta_forward(p, gap(x)))


def vcmn_backward(p: MetaNetParams, x, grad_out) -> VcmnGradients:
    """Gradients of ``sum(grad_out * vcmn_forward(p, x))``."""
    x = _as_tokens(x)
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != x.shape:
        raise InputError(f"grad_out shape {g.shape} != input shape {x.shape}")
    if x.shape[1] != p.dim:
        raise InputError(f"token dim {x.shape[1]} != params dim {p.dim}")
    n = x.shape[0]
    c = gap(x)
    pre = p.w1 @ c
    h = np.maximum(pre, 0.0)
    db = g.sum(axis=0)
    dw2 = np.outer(db, h)
    dh = p.w2.T @ db
    dpre = dh * (pre > 0.0)
    dw1 = np.outer(dpre, c)
    dc = p.w1.T @ dpre
    dx = g + dc / n
    return VcmnGradients(dw1=dw1, dw2=dw2, dx=dx)
