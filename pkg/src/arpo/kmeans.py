"""Lloyd's k-means with k-means++ seeding, small and deterministic.

Each restart is polished with Hartigan single-point transfers, which escape
many Lloyd fixed points that are not local minima of the SSE.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError


@dataclass
class KMeansResult:
    labels: np.ndarray  # (n,) int
    centroids: np.ndarray  # (k_eff, d)
    sse: float
    n_iter: int


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    while len(centers) < k:
        total = d2.sum()
        if total <= 0.0:
            # every remaining point coincides with a center
            break
        idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
        idx = min(idx, n - 1)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _lloyd(x: np.ndarray, centroids: np.ndarray, max_iter: int, tol: float) -> KMeansResult:
    c = centroids.copy()
    k = len(c)
    labels = np.zeros(len(x), dtype=int)
    it = 0
    for it in range(1, max_iter + 1):
        d = _sq_dists(x, c)
        labels = d.argmin(axis=1)
        new_c = c.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_c[j] = x[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point farthest from its center
                far = int(d[np.arange(len(x)), labels].argmax())
                new_c[j] = x[far]
                labels[far] = j
        shift = float(((new_c - c) ** 2).sum())
        c = new_c
        if shift <= tol:
            break
    d = _sq_dists(x, c)
    labels = d.argmin(axis=1)
    sse = float(d[np.arange(len(x)), labels].sum())
    return KMeansResult(labels=labels, centroids=c, sse=sse, n_iter=it)


def _hartigan(x: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    labels = labels.copy()
    cnt = np.bincount(labels, minlength=k).astype(float)
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    moved = True
    while moved:
        moved = False
        for i in range(len(x)):
            a = labels[i]
            if cnt[a] <= 1:
                continue
            c = sums / np.maximum(cnt, 1.0)[:, None]
            d = ((x[i] - c) ** 2).sum(axis=1)
            # SSE change of adding x_i to each cluster, and of removing it from its own
            cost = cnt / (cnt + 1.0) * d
            cost[a] = cnt[a] / (cnt[a] - 1.0) * d[a]
            b = int(cost.argmin())
            if b != a and cost[b] < cost[a] * (1.0 - 1e-12):
                cnt[a] -= 1
                cnt[b] += 1
                sums[a] -= x[i]
                sums[b] += x[i]
                labels[i] = b
                moved = True
    return labels


def _finish(x: np.ndarray, labels: np.ndarray, k: int, n_iter: int) -> KMeansResult:
    c = np.zeros((k, x.shape[1]))
    for j in range(k):
        members = labels == j
        if members.any():
            c[j] = x[members].mean(axis=0)
    sse = float(((x - c[labels]) ** 2).sum())
    return KMeansResult(labels=labels, centroids=c, sse=sse, n_iter=n_iter)


def kmeans(
    vectors: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol: float = 1e-12,
    n_init: int = 10,
) -> KMeansResult:
    """Cluster ``vectors`` (n, d) into at most ``k`` groups.

    The effective cluster count is capped by the number of distinct points.
    The best of ``n_init`` k-means++ restarts (lowest SSE) is returned; the
    result is a pure function of the inputs and ``seed``.
    """
    try:
        x = np.asarray(vectors, dtype=float)
    except ValueError:
        raise InputError("all vectors must have the same dimension") from None
    if x.ndim != 2:
        raise InputError(f"expected an (n, d) array of vectors, got shape {x.shape}")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if len(x) == 0:
        raise InputError("kmeans needs at least one point")
    k = min(k, len(x))
    rng = np.random.default_rng(seed)
    best: KMeansResult | None = None
    for _ in range(max(n_init, 1)):
        res = _lloyd(x, _plusplus(x, k, rng), max_iter, tol)
        res = _finish(x, _hartigan(x, res.labels, len(res.centroids)), len(res.centroids), res.n_iter)
        if best is None or res.sse < best.sse:
            best = res
    assert best is not None
    return best
