"""Ensemble anchor affinity and its shared spectral embedding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .anchor import AnchorConfig, SparseAffinity, anchor_affinity
from .core import SparseRowMatrix, derive_rng, hstack_sparse, row_l2_normalize
from .kmeans import KMeansConfig, Partition, kmeans


class StageError(RuntimeError):
    """A pipeline failure tagged with the stage (and encoding index) it came from."""

    def __init__(self, stage: str, message: str, ell: int | None = None):
        self.stage = stage
        self.ell = ell
        where = stage if ell is None else f"{stage}[{ell}]"
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True, eq=False)
class EnsembleAffinity:
    z_bar: SparseRowMatrix
    block_offsets: tuple  # block l spans columns [block_offsets[l], block_offsets[l + 1])
    m: int


@dataclass(frozen=True, eq=False)
class SpectralEmbedding:
    b: np.ndarray
    singular_values: np.ndarray


def _z_hat(a) -> SparseRowMatrix:
    return a.z_hat if isinstance(a, SparseAffinity) else a


def concat_ensemble(affinities) -> EnsembleAffinity:
    """``[Z_1 | ... | Z_m] / sqrt(m)`` over the normalised blocks."""
    blocks = [_z_hat(a) for a in affinities]
    if not blocks:
        raise ValueError("need at least one affinity")
    m = len(blocks)
    stacked = hstack_sparse(blocks)
    offsets = tuple(int(o) for o in np.cumsum([0] + [b.cols for b in blocks]))
    z_bar = stacked if m == 1 else stacked.scale(1.0 / np.sqrt(m))
    return EnsembleAffinity(z_bar, offsets, m)


def fix_signs(b: np.ndarray) -> np.ndarray:
    """Flip columns so each column's largest-magnitude entry is positive
    (the earliest row wins exact ties)."""
    idx = np.argmax(np.abs(b), axis=0)
    signs = np.sign(b[idx, np.arange(b.shape[1])])
    signs[signs == 0] = 1.0
    return b * signs


def topk_left_singular(z_bar: SparseRowMatrix, k: int) -> SpectralEmbedding:
    """Top-k left singular pairs of ``z_bar`` through its p' x p' Gram matrix.

    The Gram matrix is eigendecomposed densely; each left vector is recovered
    as ``z_bar v / sqrt(lambda)``.
    """
    n, p = z_bar.shape
    if k > p or k > n:
        raise ValueError(f"k={k} exceeds matrix shape {z_bar.shape}")
    zs = z_bar.to_scipy()
    gram = (zs.T @ zs).toarray()
    gram = (gram + gram.T) / 2
    evals, evecs = np.linalg.eigh(gram)
    evals, evecs = evals[::-1], evecs[:, ::-1]
    cutoff = max(evals[0], 0.0) * p * np.finfo(np.float64).eps
    rank = int((evals > cutoff).sum())
    if rank < k:
        raise ValueError(f"only {rank} positive singular values (numerical rank {rank}) for k={k}")
    lam = evals[:k]
    b = np.asarray(zs @ evecs[:, :k]) / np.sqrt(lam)
    return SpectralEmbedding(fix_signs(b), np.sqrt(lam))


def sc_edae(encodings, anchor_cfgs, kmeans_cfg: KMeansConfig, k: int, seed: int = 0,
            labels=None, renormalize_rows: bool = False):
    """Cluster ``n`` points from ``m`` encodings via the ensemble anchor graph.

    ``anchor_cfgs`` is a single AnchorConfig or one per encoding. Landmark
    selection for encoding ``l`` draws from stream ``(seed, "landmarks",
    labels[l])``; ``labels`` defaults to the encoding indices.

    Returns ``(partition, embedding, ensemble)``.
    """
    encodings = list(encodings)
    if not encodings:
        raise ValueError("need at least one encoding")
    if k < 2:
        raise ValueError("k must be >= 2")
    if isinstance(anchor_cfgs, AnchorConfig):
        anchor_cfgs = [anchor_cfgs] * len(encodings)
    if len(anchor_cfgs) != len(encodings):
        raise ValueError("one anchor config per encoding required")
    labels = list(range(len(encodings))) if labels is None else list(labels)
    affinities = []
    for ell, (y, acfg, lab) in enumerate(zip(encodings, anchor_cfgs, labels)):
        try:
            affinities.append(anchor_affinity(y, acfg, derive_rng(seed, "landmarks", lab)))
        except (ValueError, FloatingPointError) as exc:
            raise StageError("anchor_graph", str(exc), ell) from exc
    try:
        ens = concat_ensemble(affinities)
    except ValueError as exc:
        raise StageError("concat_ensemble", str(exc)) from exc
    try:
        emb = topk_left_singular(ens.z_bar, k)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise StageError("svd", str(exc)) from exc
    feats = row_l2_normalize(emb.b) if renormalize_rows else emb.b
    try:
        part = kmeans(feats, KMeansConfig(k, kmeans_cfg.n_init, kmeans_cfg.max_iter, kmeans_cfg.tol, kmeans_cfg.seed))
    except ValueError as exc:
        raise StageError("kmeans", str(exc)) from exc
    return part, emb, ens


__all__ = [
    "EnsembleAffinity", "SpectralEmbedding", "StageError", "concat_ensemble",
    "topk_left_singular", "sc_edae", "fix_signs", "Partition",
]
