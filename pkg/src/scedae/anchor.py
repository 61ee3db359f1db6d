"""Landmark (anchor) graphs over a single encoding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SparseRowMatrix, as_dense, pairwise_sq_dists
from .kmeans import kmeanspp_seed, lloyd

PER_POINT_MEAN = "per_point_mean"
GLOBAL_FIXED = "global_fixed"


@dataclass(frozen=True)
class AnchorConfig:
    p: int = 100
    r: int = 5
    bandwidth_mode: str = PER_POINT_MEAN
    sigma: float | None = None  # only read in global_fixed mode
    max_iter: int = 300
    tol: float = 1e-4

    def __post_init__(self):
        if not 1 <= self.r <= self.p:
            raise ValueError(f"need 1 <= r <= p, got r={self.r}, p={self.p}")
        if self.bandwidth_mode not in (PER_POINT_MEAN, GLOBAL_FIXED):
            raise ValueError(f"unknown bandwidth mode {self.bandwidth_mode!r}")
        if self.bandwidth_mode == GLOBAL_FIXED and not (self.sigma and self.sigma > 0):
            raise ValueError("global_fixed bandwidth needs sigma > 0")

    def check_n(self, n: int):
        if self.p > n:
            raise ValueError(f"p={self.p} landmarks exceed n={n} points")


@dataclass(frozen=True, eq=False)
class LandmarkSet:
    u: np.ndarray

    @property
    def p(self) -> int:
        return self.u.shape[0]


@dataclass(frozen=True, eq=False)
class SparseAffinity:
    z_hat: SparseRowMatrix
    landmarks: LandmarkSet
    sigma_used: np.ndarray
    z: SparseRowMatrix | None = None


def select_landmarks(y, p: int, rng: np.random.Generator, max_iter: int = 300, tol: float = 1e-4) -> LandmarkSet:
    """Centroids of one k-means++/Lloyd run with ``k = p``."""
    y = as_dense(y, "encoding")
    if p > y.shape[0]:
        raise ValueError(f"p={p} landmarks exceed n={y.shape[0]} points")
    part = lloyd(y, kmeanspp_seed(y, p, rng), max_iter, tol)
    return LandmarkSet(part.centroids)


def build_z(y, landmarks: LandmarkSet, cfg: AnchorConfig):
    """Row-stochastic point-to-landmark affinity over the r nearest landmarks.

    Returns ``(z, sigmas)``. Each row keeps exactly ``r`` entries; nearest
    landmark ties go to the lower landmark index.
    """
    y = as_dense(y, "encoding")
    u = landmarks.u
    if u.shape[0] != cfg.p:
        raise ValueError(f"expected {cfg.p} landmarks, got {u.shape[0]}")
    d2 = pairwise_sq_dists(y, u)
    order = np.argsort(d2, axis=1, kind="stable")[:, : cfg.r]
    near = np.take_along_axis(d2, order, axis=1)
    if cfg.bandwidth_mode == PER_POINT_MEAN:
        sigmas = np.sqrt(near).mean(axis=1)
    else:
        sigmas = np.full(y.shape[0], float(cfg.sigma))
    degenerate = sigmas == 0
    safe = np.where(degenerate, 1.0, sigmas)
    # shift by the nearest distance: the ratio is unchanged and the largest weight is 1
    w = np.exp(-(near - near[:, :1]) / (2.0 * safe[:, None] ** 2))
    w[degenerate] = 1.0
    # far landmarks under a small fixed sigma can underflow; keep them stored
    w = np.maximum(w, np.finfo(np.float64).tiny)
    w /= w.sum(axis=1, keepdims=True)
    return SparseRowMatrix.from_rows(cfg.p, order, w), sigmas


def normalize_z(z: SparseRowMatrix) -> SparseRowMatrix:
    """Scale column j by ``colsum_j ** -1/2``; empty columns stay empty."""
    if np.any(z.values < 0):
        raise ValueError("affinity has negative entries")
    colsum = z.column_sums()
    factors = np.zeros_like(colsum)
    used = colsum > 0
    factors[used] = 1.0 / np.sqrt(colsum[used])
    return z.scale_columns(factors)


def anchor_affinity(y, cfg: AnchorConfig, rng: np.random.Generator) -> SparseAffinity:
    """select_landmarks -> build_z -> normalize_z for one encoding."""
    y = as_dense(y, "encoding")
    cfg.check_n(y.shape[0])
    lm = select_landmarks(y, cfg.p, rng, cfg.max_iter, cfg.tol)
    z, sigmas = build_z(y, lm, cfg)
    return SparseAffinity(normalize_z(z), lm, sigmas, z)
