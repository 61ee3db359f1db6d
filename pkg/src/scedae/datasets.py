"""Synthetic FCPS-style generators, nonlinear liftings and matrix file IO."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit

from .core import as_dense, derive_rng, row_l2_normalize

# Geometry constants. The generators are statistical stand-ins for the FCPS
# shapes; only (n, d, k) and the qualitative difficulty are fixed.
TETRA_PER_CLUSTER = 100
TETRA_STD = 0.4  # vertices sit sqrt(8) apart, so the blobs touch
CHAINLINK_PER_RING = 500
CHAINLINK_JITTER = 0.05
LSUN_L_POINTS = 200
LSUN_BLOBS = (((1.0, 1.0), 0.1, 100), ((0.2, 0.1), 0.2, 100))  # (centre, std, count)
SURROGATE_STD = 0.12

LIFT_KINDS = ("sigmoid_stack", "sigmoid_squared", "tan_sigmoid")
_BIN_MAGIC = b"SCE1"


@dataclass(eq=False)
class Dataset:
    name: str
    x: np.ndarray
    labels: np.ndarray | None = None
    k_true: int | None = None

    def __post_init__(self):
        self.x = as_dense(self.x, "x")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.x.shape[0],):
                raise ValueError("one label per row required")
            if self.k_true is None:
                self.k_true = int(self.labels.max()) + 1 if self.labels.size else 0
            if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k_true):
                raise ValueError(f"labels must lie in [0, {self.k_true})")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


def _shuffled(name, x, y, k, rng):
    perm = rng.permutation(x.shape[0])
    return Dataset(name, x[perm], y[perm], k)


def gen_tetra(seed: int = 0) -> Dataset:
    """Four touching Gaussian blobs on the vertices of a regular tetrahedron."""
    rng = derive_rng(seed, "tetra")
    verts = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=np.float64)
    x = np.concatenate([v + TETRA_STD * rng.standard_normal((TETRA_PER_CLUSTER, 3)) for v in verts])
    y = np.repeat(np.arange(4), TETRA_PER_CLUSTER)
    return _shuffled("tetra", x, y, 4, rng)


def gen_chainlink(seed: int = 0) -> Dataset:
    """Two interlocked unit rings in orthogonal planes."""
    rng = derive_rng(seed, "chainlink")
    t1 = rng.uniform(0, 2 * np.pi, CHAINLINK_PER_RING)
    t2 = rng.uniform(0, 2 * np.pi, CHAINLINK_PER_RING)
    ring1 = np.column_stack([np.cos(t1), np.sin(t1), np.zeros_like(t1)])
    ring2 = np.column_stack([1 + np.cos(t2), np.zeros_like(t2), np.sin(t2)])
    x = np.concatenate([ring1, ring2]) - np.array([0.5, 0.0, 0.0])
    x += CHAINLINK_JITTER * rng.standard_normal(x.shape)
    y = np.repeat([0, 1], CHAINLINK_PER_RING)
    return _shuffled("chainlink", x, y, 2, rng)


def gen_lsun(seed: int = 0) -> Dataset:
    """A uniform L-shaped region plus two Gaussian blobs of different spread."""
    rng = derive_rng(seed, "lsun")
    # L = horizontal bar [-1.5, 1] x [-1.5, -1] plus vertical bar [-1.5, -1] x [-1, 1];
    # sample by area so the density is uniform
    area_h, area_v = 2.5 * 0.5, 0.5 * 2.0
    n_h = int(round(LSUN_L_POINTS * area_h / (area_h + area_v)))
    bar_h = rng.uniform([-1.5, -1.5], [1.0, -1.0], (n_h, 2))
    bar_v = rng.uniform([-1.5, -1.0], [-1.0, 1.0], (LSUN_L_POINTS - n_h, 2))
    parts = [bar_h, bar_v]
    labels = [np.zeros(LSUN_L_POINTS, dtype=np.int64)]
    for c, (centre, std, count) in enumerate(LSUN_BLOBS, start=1):
        parts.append(np.asarray(centre) + std * rng.standard_normal((count, 2)))
        labels.append(np.full(count, c))
    return _shuffled("lsun", np.concatenate(parts), np.concatenate(labels), 3, rng)


def gen_gaussian_classes(seed: int = 0, n: int = 2000, k: int = 10, d_low: int = 3) -> Dataset:
    """``k`` equal-size isotropic Gaussian classes in ``d_low`` dimensions.

    Centres are drawn uniformly from ``[-1.5, 1.5]^d_low`` by rejection so
    that no two are closer than 0.8. Lifted, this is the digit-like surrogate.
    """
    rng = derive_rng(seed, "gaussian_classes", k, d_low)
    centres = []
    while len(centres) < k:
        c = rng.uniform(-1.5, 1.5, d_low)
        if all(np.linalg.norm(c - o) >= 0.8 for o in centres):
            centres.append(c)
    y = np.arange(n) % k
    x = np.asarray(centres)[y] + SURROGATE_STD * rng.standard_normal((n, d_low))
    return _shuffled(f"gauss{k}", x, y, k, rng)


GENERATORS = {"tetra": gen_tetra, "chainlink": gen_chainlink, "lsun": gen_lsun,
              "gaussian_classes": gen_gaussian_classes}


# --------------------------------------------------------------------------
# lifting

@dataclass(frozen=True, eq=False)
class LiftingTransform:
    w: np.ndarray  # 10 x d_low
    u: np.ndarray  # 100 x 10
    kind: str = "sigmoid_stack"

    def __post_init__(self):
        if self.kind not in LIFT_KINDS:
            raise ValueError(f"unknown lifting kind {self.kind!r}")
        if self.w.shape[0] != self.u.shape[1]:
            raise ValueError("w rows must match u columns")

    @property
    def output_dim(self) -> int:
        return self.u.shape[0] if self.kind == "sigmoid_stack" else self.w.shape[0]


def make_lifting(d_low: int, kind: str, rng: np.random.Generator, hidden: int = 10, out: int = 100) -> LiftingTransform:
    if d_low not in (2, 3):
        raise ValueError("lifting expects 2-D or 3-D inputs")
    w = rng.standard_normal((hidden, d_low))
    u = rng.standard_normal((out, hidden))
    return LiftingTransform(w, u, kind)


def lift(h, t: LiftingTransform) -> np.ndarray:
    """Map low-dimensional points through the random sigmoid network ``t``."""
    h = as_dense(h, "h")
    if h.shape[1] != t.w.shape[1]:
        raise ValueError(f"lifting expects {t.w.shape[1]} columns, got {h.shape[1]}")
    inner = expit(h @ t.w.T)
    if t.kind == "sigmoid_stack":
        return expit(inner @ t.u.T)
    if t.kind == "sigmoid_squared":
        return expit(inner) ** 2
    return np.tan(inner)


def lift_dataset(ds: Dataset, kind: str, seed: int) -> Dataset:
    t = make_lifting(ds.d, kind, derive_rng(seed, "lift", kind))
    return Dataset(f"{ds.name}-{kind}", lift(ds.x, t), ds.labels, ds.k_true)


# --------------------------------------------------------------------------
# preprocessing

def rescale_unit(m, divisor: float) -> np.ndarray:
    if divisor <= 0:
        raise ValueError("divisor must be positive")
    return np.asarray(m, dtype=np.float64) / divisor


def preprocess(x, divisor: float = 1.0, l2: bool = True) -> np.ndarray:
    """Divide by ``divisor`` then (optionally) L2-normalise each row."""
    x = rescale_unit(x, divisor)
    return row_l2_normalize(x) if l2 else x


# --------------------------------------------------------------------------
# file formats

def load_csv(path) -> Dataset:
    """CSV with header ``x0,...,x{d-1}`` and an optional trailing ``label`` column."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        has_labels = bool(header) and header[-1] == "label"
        feats = header[:-1] if has_labels else header
        if not feats or feats != [f"x{j}" for j in range(len(feats))]:
            raise ValueError(f"{path}: malformed header {header!r}; expected x0..x{{d-1}}[,label]")
        rows, labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not f.strip() for f in rec):
                continue
            if len(rec) != len(header):
                raise ValueError(f"{path}: row {lineno} has {len(rec)} fields, expected {len(header)}")
            vals = []
            for j, f in enumerate(rec[: len(feats)]):
                try:
                    v = float(f)
                except ValueError:
                    raise ValueError(f"{path}: row {lineno}, column {header[j]}: not a number: {f!r}") from None
                if not np.isfinite(v):
                    raise ValueError(f"{path}: row {lineno}, column {header[j]}: non-finite value")
                vals.append(v)
            rows.append(vals)
            if has_labels:
                try:
                    labels.append(int(rec[-1]))
                except ValueError:
                    raise ValueError(f"{path}: row {lineno}, column label: not an integer: {rec[-1]!r}") from None
    x = np.array(rows, dtype=np.float64).reshape(len(rows), len(feats))
    return Dataset(path.stem, x, np.array(labels, dtype=np.int64) if has_labels else None)


def save_csv(ds: Dataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = [f"x{j}" for j in range(ds.d)] + (["label"] if ds.labels is not None else [])
        w.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.x[i]]
            if ds.labels is not None:
                row.append(str(int(ds.labels[i])))
            w.writerow(row)


def save_binary(ds_or_matrix, path) -> None:
    """``SCE1`` | rows u64 | cols u64 | has_labels u8 | f64 values | i32 labels (all LE)."""
    if isinstance(ds_or_matrix, Dataset):
        x, labels = ds_or_matrix.x, ds_or_matrix.labels
    else:
        x, labels = as_dense(ds_or_matrix), None
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<QQB", x.shape[0], x.shape[1], labels is not None))
        fh.write(np.ascontiguousarray(x, dtype="<f8").tobytes())
        if labels is not None:
            fh.write(np.ascontiguousarray(labels, dtype="<i4").tobytes())


def load_binary(path) -> Dataset:
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 21 or data[:4] != _BIN_MAGIC:
        raise ValueError(f"{path}: malformed header (expected magic SCE1)")
    rows, cols, flag = struct.unpack_from("<QQB", data, 4)
    if flag not in (0, 1):
        raise ValueError(f"{path}: malformed header (label flag {flag})")
    need = 21 + 8 * rows * cols + (4 * rows if flag else 0)
    if len(data) != need:
        raise ValueError(f"{path}: expected {need} bytes for a {rows}x{cols} matrix, found {len(data)}")
    x = np.frombuffer(data, "<f8", rows * cols, 21).reshape(rows, cols).astype(np.float64)
    bad = np.argwhere(~np.isfinite(x))
    if bad.size:
        raise ValueError(f"{path}: non-finite entry at row {bad[0][0]}, column {bad[0][1]}")
    labels = np.frombuffer(data, "<i4", rows, 21 + 8 * rows * cols).astype(np.int64) if flag else None
    return Dataset(path.stem, x, labels)


def load_matrix(path) -> Dataset:
    """Dispatch on content: binary if the file starts with the SCE1 magic, CSV otherwise."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    return load_binary(path) if head == _BIN_MAGIC else load_csv(path)
