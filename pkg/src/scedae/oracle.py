"""Dense small-n reference computations used as baselines and test oracles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import as_dense, gaussian_kernel, pairwise_sq_dists, row_l2_normalize
from .kmeans import KMeansConfig, Partition, kmeans

MAX_DENSE_N = 2000


@dataclass(frozen=True, eq=False)
class DenseSimilarity:
    s: np.ndarray

    def __post_init__(self):
        s = self.s
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise ValueError("similarity must be square")
        if np.any(s < 0):
            raise ValueError("similarity has negative entries")
        if np.abs(s - s.T).max(initial=0.0) > 1e-12:
            raise ValueError("similarity is not symmetric")


def median_sigma(x) -> float:
    """Median pairwise Euclidean distance over distinct pairs."""
    d2 = pairwise_sq_dists(x, x)
    iu = np.triu_indices(d2.shape[0], 1)
    return float(np.median(np.sqrt(d2[iu]))) if iu[0].size else 1.0


def dense_normalized_similarity(x, sigma: float) -> DenseSimilarity:
    """``D^-1/2 K D^-1/2`` for the full Gaussian kernel matrix ``K``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    x = as_dense(x, "x")
    kmat = gaussian_kernel(pairwise_sq_dists(x, x), sigma)
    kmat = (kmat + kmat.T) / 2
    dinv = 1.0 / np.sqrt(kmat.sum(axis=1))
    return DenseSimilarity(dinv[:, None] * kmat * dinv[None, :])


def top_eigenpairs(s, k: int):
    """Largest-k eigenpairs of a symmetric matrix, descending."""
    evals, evecs = np.linalg.eigh(np.asarray(s, dtype=np.float64))
    return evals[::-1][:k], evecs[:, ::-1][:, :k]


def dense_spectral_clustering(sim: DenseSimilarity, k: int, cfg: KMeansConfig, renormalize_rows: bool = True):
    """Top-k eigenvectors of S, rows renormalised, then k-means.

    Returns ``(partition, b, eigenvalues)``.
    """
    s = sim.s
    if k > s.shape[0]:
        raise ValueError(f"k={k} exceeds n={s.shape[0]}")
    evals, b = top_eigenpairs(s, k)
    feats = row_l2_normalize(b) if renormalize_rows else b
    part = kmeans(feats, KMeansConfig(k, cfg.n_init, cfg.max_iter, cfg.tol, cfg.seed))
    return part, b, evals


def dense_ensemble_similarity(affinities) -> DenseSimilarity:
    """``(1/m) sum_l Z_l Z_l^T`` densified; small n only."""
    blocks = [getattr(a, "z_hat", a) for a in affinities]
    if not blocks:
        raise ValueError("need at least one affinity")
    n = blocks[0].rows
    if n > MAX_DENSE_N:
        raise ValueError(f"dense oracle limited to n <= {MAX_DENSE_N}, got {n}")
    s = np.zeros((n, n))
    for z in blocks:
        if z.rows != n:
            raise ValueError("row count mismatch")
        zd = z.to_dense()
        s += zd @ zd.T
    s /= len(blocks)
    return DenseSimilarity((s + s.T) / 2)


__all__ = ["DenseSimilarity", "dense_normalized_similarity", "dense_spectral_clustering",
           "dense_ensemble_similarity", "median_sigma", "top_eigenpairs", "Partition"]
