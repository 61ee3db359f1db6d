"""Numeric primitives shared across the pipeline.

Dense matrices are plain ``float64`` numpy arrays (row-major, C order).
Sparse matrices use the small CSR container below, which keeps the
invariants the spectral code relies on: sorted unique column ids per row
and no stored zeros.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

# Upper bound on the size of the (rows, cols, features) difference block
# materialised by pairwise_sq_dists.
_DIST_BLOCK = 1 << 22


def as_dense(m, name="matrix") -> np.ndarray:
    """Return ``m`` as a 2-D C-ordered float64 array with finite entries."""
    a = np.ascontiguousarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        bad = np.argwhere(~np.isfinite(a))[0]
        raise ValueError(f"{name} has a non-finite entry at row {bad[0]}, column {bad[1]}")
    return a


# --------------------------------------------------------------------------
# randomness

def _label_word(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("integer stream labels must be non-negative")
        return int(label)
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(seed: int, *labels) -> np.random.Generator:
    """Generator keyed by ``(seed, *labels)``.

    Labels may be non-negative ints or strings; strings are hashed to a
    64-bit word. Two calls with equal keys yield identical streams, and the
    stream does not depend on how many other streams were drawn before.
    """
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_label_word(x) for x in labels))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *labels) -> int:
    """A 63-bit integer seed drawn from the ``(seed, *labels)`` stream."""
    return int(derive_rng(seed, *labels).integers(0, 2**63 - 1))


# --------------------------------------------------------------------------
# dense helpers

def pairwise_sq_dists(a, b) -> np.ndarray:
    """Squared Euclidean distances between the rows of ``a`` and ``b``.

    Computed from explicit differences rather than the ``|a|^2 + |b|^2 - 2ab``
    expansion, so entries are exact up to rounding and never negative.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    n, p = a.shape[0], b.shape[0]
    out = np.empty((n, p))
    step = max(1, _DIST_BLOCK // max(1, p * a.shape[1]))
    for start in range(0, n, step):
        diff = a[start:start + step, None, :] - b[None, :, :]
        np.einsum("ijk,ijk->ij", diff, diff, out=out[start:start + step])
    return out


def gaussian_kernel(sq_dist, sigma):
    """``exp(-sq_dist / (2 sigma^2))``; works on scalars and arrays."""
    if np.any(np.asarray(sigma) <= 0):
        raise ValueError("sigma must be positive")
    if np.any(np.asarray(sq_dist) < 0):
        raise ValueError("squared distance must be non-negative")
    return np.exp(-np.asarray(sq_dist, dtype=np.float64) / (2.0 * np.asarray(sigma, dtype=np.float64) ** 2))


def row_l2_normalize(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    safe = np.where(norms > 0, norms, 1.0)
    return m / safe[:, None]


# --------------------------------------------------------------------------
# sparse rows

@dataclass(frozen=True, eq=False)
class SparseRowMatrix:
    """Compressed sparse rows with sorted column ids and no stored zeros."""

    rows: int
    cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        offs = np.asarray(self.row_offsets, dtype=np.int64)
        idx = np.asarray(self.col_indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if offs.shape != (self.rows + 1,) or offs[0] != 0 or offs[-1] != idx.size:
            raise ValueError("row_offsets must have rows+1 entries running from 0 to nnz")
        if np.any(np.diff(offs) < 0):
            raise ValueError("row_offsets must be nondecreasing")
        if idx.size != val.size:
            raise ValueError("col_indices and values differ in length")
        if idx.size:
            if idx.min() < 0 or idx.max() >= self.cols:
                raise ValueError("column index out of range")
            # strictly increasing within a row: a drop is only allowed at row starts
            drops = np.flatnonzero(np.diff(idx) <= 0) + 1
            starts = set(offs[1:-1].tolist())
            if any(int(d) not in starts for d in drops):
                raise ValueError("column indices must be strictly increasing within each row")
        if np.any(val == 0):
            raise ValueError("explicit zeros are not allowed")
        if not np.all(np.isfinite(val)):
            raise ValueError("non-finite value")
        for name, arr in (("row_offsets", offs), ("col_indices", idx), ("values", val)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @classmethod
    def from_dense(cls, m) -> "SparseRowMatrix":
        m = as_dense(m)
        mask = m != 0
        offs = np.concatenate([[0], np.cumsum(mask.sum(axis=1))])
        r, c = np.nonzero(mask)
        return cls(m.shape[0], m.shape[1], offs, c, m[r, c])

    @classmethod
    def from_rows(cls, cols: int, col_ids, vals) -> "SparseRowMatrix":
        """Build from a ``(rows, r)`` block of column ids and values, sorting each row."""
        col_ids = np.asarray(col_ids, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        order = np.argsort(col_ids, axis=1, kind="stable")
        col_ids = np.take_along_axis(col_ids, order, axis=1)
        vals = np.take_along_axis(vals, order, axis=1)
        keep = vals != 0
        offs = np.concatenate([[0], np.cumsum(keep.sum(axis=1))])
        return cls(col_ids.shape[0], cols, offs, col_ids[keep], vals[keep])

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.rows), np.diff(self.row_offsets))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_ids(), self.col_indices] = self.values
        return out

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, self.col_indices, self.row_offsets), shape=self.shape)

    def scale_columns(self, factors) -> "SparseRowMatrix":
        """Multiply column j by ``factors[j]``; entries that become zero are dropped."""
        factors = np.asarray(factors, dtype=np.float64)
        if factors.shape != (self.cols,):
            raise ValueError("one factor per column required")
        vals = self.values * factors[self.col_indices]
        keep = vals != 0
        counts = np.bincount(self.row_ids()[keep], minlength=self.rows)
        offs = np.concatenate([[0], np.cumsum(counts)])
        return SparseRowMatrix(self.rows, self.cols, offs, self.col_indices[keep], vals[keep])

    def scale(self, c: float) -> "SparseRowMatrix":
        return SparseRowMatrix(self.rows, self.cols, self.row_offsets, self.col_indices, self.values * c)

    def column_sums(self) -> np.ndarray:
        # bincount accumulates in storage order: row-major, ascending row
        return np.bincount(self.col_indices, weights=self.values, minlength=self.cols).astype(np.float64)

    def to_triplets(self) -> str:
        """One ``row col value`` line per stored entry, sorted by (row, col)."""
        lines = [f"{i} {j} {v!r}" for i, j, v in zip(self.row_ids().tolist(), self.col_indices.tolist(), self.values.tolist())]
        return "\n".join(lines) + ("\n" if lines else "")


def sparse_matvec(z: SparseRowMatrix, v) -> np.ndarray:
    """``z @ v`` with each row summed left to right in column order."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (z.cols,):
        raise ValueError(f"vector of length {z.cols} expected, got {v.shape}")
    prod = z.values * v[z.col_indices]
    out = np.zeros(z.rows)
    lengths = np.diff(z.row_offsets)
    width = int(lengths.max()) if z.rows else 0
    # pad rows to a common width so the accumulation is a plain ordered loop
    pos = np.arange(z.nnz) - np.repeat(z.row_offsets[:-1], lengths)
    block = np.zeros((z.rows, width))
    block[z.row_ids(), pos] = prod
    for j in range(width):
        out += block[:, j]
    return out


def sparse_transpose_matvec(z: SparseRowMatrix, v) -> np.ndarray:
    """``z.T @ v``; contributions to each column accumulate in ascending row order."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (z.rows,):
        raise ValueError(f"vector of length {z.rows} expected, got {v.shape}")
    return np.bincount(z.col_indices, weights=z.values * v[z.row_ids()], minlength=z.cols).astype(np.float64)


def hstack_sparse(blocks) -> SparseRowMatrix:
    """Horizontal concatenation of CSR blocks sharing a row count."""
    blocks = list(blocks)
    if not blocks:
        raise ValueError("need at least one block")
    n = blocks[0].rows
    for b in blocks:
        if b.rows != n:
            raise ValueError(f"row count mismatch: {b.rows} vs {n}")
    offsets = np.cumsum([0] + [b.cols for b in blocks])
    row_lists = []
    for b, off in zip(blocks, offsets[:-1]):
        row_lists.append((b.row_ids(), b.col_indices + off, b.values))
    rows = np.concatenate([r for r, _, _ in row_lists])
    cols = np.concatenate([c for _, c, _ in row_lists])
    vals = np.concatenate([v for _, _, v in row_lists])
    order = np.lexsort((cols, rows))
    counts = np.bincount(rows, minlength=n)
    offs = np.concatenate([[0], np.cumsum(counts)])
    return SparseRowMatrix(n, int(offsets[-1]), offs, cols[order], vals[order])
