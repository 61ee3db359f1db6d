"""k-means++ seeding and Lloyd refinement."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import as_dense, derive_rng, pairwise_sq_dists


@dataclass(frozen=True)
class KMeansConfig:
    k: int
    n_init: int = 10
    max_iter: int = 300
    tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")


@dataclass(eq=False)
class Partition:
    labels: np.ndarray
    k: int
    inertia: float = 0.0
    centroids: np.ndarray | None = None
    n_iter: int = 0
    inertia_history: list = field(default_factory=list)
    repaired: int = 0


def kmeanspp_seed(x, k: int, rng: np.random.Generator) -> np.ndarray:
    """D^2 seeding: first centre uniform, each next one proportional to the
    squared distance to the closest centre already chosen."""
    x = as_dense(x, "x")
    n = x.shape[0]
    if k > n:
        raise ValueError(f"cannot seed {k} centroids from {n} points")
    if k < 1:
        raise ValueError("k must be >= 1")
    chosen = [int(rng.integers(n))]
    closest = pairwise_sq_dists(x, x[chosen[0]][None, :])[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            cdf = np.cumsum(closest)
            idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
            idx = min(idx, n - 1)
            # guard against landing on a zero-weight slot through rounding
            while closest[idx] == 0:
                idx -= 1
        else:
            # every point coincides with a chosen centre
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(free.size)])
        chosen.append(idx)
        closest = np.minimum(closest, pairwise_sq_dists(x, x[idx][None, :])[:, 0])
    return x[chosen].copy()


def _assign(x, centroids):
    d = pairwise_sq_dists(x, centroids)
    labels = np.argmin(d, axis=1)  # first minimum -> lowest centroid index
    return labels, d[np.arange(x.shape[0]), labels]


def lloyd(x, init_centroids, max_iter: int = 300, tol: float = 1e-4) -> Partition:
    """Alternate nearest-centroid assignment and mean updates.

    Stops when no centroid moves by ``tol`` or more (Euclidean), or after
    ``max_iter`` updates. Empty clusters are re-seeded at the points farthest
    from their assigned centroid.
    """
    x = as_dense(x, "x")
    c = as_dense(init_centroids, "centroids").copy()
    k = c.shape[0]
    if c.shape[1] != x.shape[1]:
        raise ValueError("centroid dimension does not match data")
    history = []
    repaired = 0
    it = 0
    labels, dist = _assign(x, c)
    history.append(float(dist.sum()))
    while it < max_iter:
        it += 1
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(c)
        np.add.at(sums, labels, x)
        new_c = c.copy()
        filled = counts > 0
        new_c[filled] = sums[filled] / counts[filled, None]
        empty = np.flatnonzero(~filled)
        if empty.size:
            own = pairwise_sq_dists(x, new_c)[np.arange(x.shape[0]), labels]
            far = np.argsort(-own, kind="stable")[: empty.size]
            new_c[empty] = x[far]
            repaired += int(empty.size)
        shift = float(np.sqrt(((new_c - c) ** 2).sum(axis=1)).max())
        c = new_c
        labels, dist = _assign(x, c)
        history.append(float(dist.sum()))
        if shift < tol:
            break
    return Partition(labels=labels, k=k, inertia=history[-1], centroids=c,
                     n_iter=it, inertia_history=history, repaired=repaired)


def kmeans(x, cfg: KMeansConfig) -> Partition:
    """Best-inertia Lloyd run over ``cfg.n_init`` k-means++ restarts.

    Restart ``i`` draws from stream ``(cfg.seed, "kmeans", i)``, so a larger
    ``n_init`` only adds candidates. Ties on inertia keep the earlier restart.
    """
    x = as_dense(x, "x")
    best = None
    for i in range(cfg.n_init):
        rng = derive_rng(cfg.seed, "kmeans", i)
        part = lloyd(x, kmeanspp_seed(x, cfg.k, rng), cfg.max_iter, cfg.tol)
        if best is None or part.inertia < best.inertia:
            best = part
    return best
