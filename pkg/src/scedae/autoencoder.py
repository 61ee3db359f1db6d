"""Fully connected autoencoders trained with mini-batch Adam on binary
cross-entropy.

Hidden layers use ReLU, the encoding layer uses ReLU or the identity, and the
reconstruction layer uses the logistic sigmoid. Weights are stored as ``(fan_in, fan_out)``
so a layer computes ``h @ W + b``.
"""
from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.special import expit

from .core import as_dense, derive_rng

_CKPT_MAGIC = b"SCAE"
# keeps sigmoid outputs strictly inside (0, 1) when the logit saturates
_PROB_EPS = 2.0 ** -52


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    widths: tuple
    encoding_dim: int = 10
    encoding_activation: str = "relu"

    def __post_init__(self):
        if self.encoding_activation not in ("relu", "linear"):
            raise ValueError(f"unknown encoding activation {self.encoding_activation!r}")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if not self.widths or any(w <= 0 for w in self.widths):
            raise ValueError(f"widths must be non-empty and positive, got {self.widths}")
        if self.encoding_dim <= 0:
            raise ValueError("encoding_dim must be positive")

    def label(self) -> str:
        return "--".join(str(w) for w in self.widths)

    def layer_sizes(self, d: int) -> list:
        """Unit counts from input through encoding back to reconstruction."""
        enc = [d, *self.widths, self.encoding_dim]
        return enc + enc[-2::-1]


def structure_permutations(widths=(50, 75, 100)) -> list:
    """All orderings of a width triple, e.g. the six 50/75/100 encoders."""
    return [tuple(p) for p in itertools.permutations(widths)]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 8
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 < self.adam_beta1 < 1 and 0 < self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.adam_epsilon <= 0:
            raise ValueError("adam_epsilon must be positive")


@dataclass(eq=False)
class AutoencoderModel:
    weights: list
    biases: list
    n_encoder: int
    loss_history: list = field(default_factory=list)
    linear_encoding: bool = False

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def encoding_dim(self) -> int:
        return self.weights[self.n_encoder - 1].shape[1]

    def encoder_widths(self) -> list:
        return [w.shape[1] for w in self.weights[: self.n_encoder]]

    def decoder_widths(self) -> list:
        return [w.shape[1] for w in self.weights[self.n_encoder:]]

    def params(self) -> list:
        return [*self.weights, *self.biases]

    def copy(self) -> "AutoencoderModel":
        return AutoencoderModel([w.copy() for w in self.weights], [b.copy() for b in self.biases],
                                self.n_encoder, list(self.loss_history), self.linear_encoding)


@dataclass(eq=False)
class EncodingSet:
    encodings: list
    provenance: list  # one dict per encoding

    def __post_init__(self):
        if not self.encodings:
            raise ValueError("need at least one encoding")
        n = self.encodings[0].shape[0]
        if any(y.shape[0] != n for y in self.encodings):
            raise ValueError("encodings disagree on the number of rows")

    @property
    def m(self) -> int:
        return len(self.encodings)


def glorot_init(shape, rng: np.random.Generator) -> np.ndarray:
    fan_in, fan_out = shape
    if fan_in <= 0 or fan_out <= 0:
        raise ValueError("fan_in and fan_out must be positive")
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_model(d: int, spec: LayerSpec, rng: np.random.Generator) -> AutoencoderModel:
    sizes = spec.layer_sizes(d)
    weights = [glorot_init((a, b), rng) for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return AutoencoderModel(weights, biases, len(spec.widths) + 1,
                            linear_encoding=spec.encoding_activation == "linear")


def _check_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"expected input with {model.input_dim} columns, got shape {x.shape}")
    return x


def _is_linear(model, i):
    return i == len(model.weights) - 1 or (model.linear_encoding and i == model.n_encoder - 1)


def _forward_logits(model, x):
    acts = [x]
    h = x
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        h = z if _is_linear(model, i) else np.maximum(z, 0.0)
        acts.append(h)
    return acts  # acts[-1] holds the output logits


def _sigmoid(z):
    return np.clip(expit(z), _PROB_EPS, 1.0 - _PROB_EPS)


def forward(model: AutoencoderModel, x_batch):
    """Return ``(activations, x_hat)``; ``activations[0]`` is the input and
    ``activations[i]`` the output of layer ``i``."""
    x = _check_input(model, x_batch)
    acts = _forward_logits(model, x)
    x_hat = _sigmoid(acts[-1])
    acts[-1] = x_hat
    return acts, x_hat


def bce_loss(x, x_hat) -> float:
    """Per-sample binary cross-entropy summed over features, averaged over samples."""
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError("shape mismatch")
    if np.any((x < 0) | (x > 1)):
        raise ValueError("targets must lie in [0, 1]")
    if np.any((x_hat <= 0) | (x_hat >= 1)):
        raise ValueError("reconstructions must lie strictly inside (0, 1)")
    per = -(x * np.log(x_hat) + (1 - x) * np.log1p(-x_hat)).sum(axis=1)
    return float(per.mean())


def _bce_logits(x, logits) -> float:
    # softplus(z) - x z == -[x log s(z) + (1 - x) log(1 - s(z))]
    per = (np.logaddexp(0.0, logits) - x * logits).sum(axis=1)
    return float(per.mean())


def loss_of(model, x) -> float:
    x = _check_input(model, x)
    return _bce_logits(x, _forward_logits(model, x)[-1])


def backward(model: AutoencoderModel, x_batch, out=None):
    """Exact gradients of the batch loss; returns ``(loss, grad_w, grad_b)``.

    ``out`` may hold preallocated ``(grad_w, grad_b)`` arrays to write into.
    """
    x = _check_input(model, x_batch)
    acts = _forward_logits(model, x)
    logits = acts[-1]
    loss = _bce_logits(x, logits)
    delta = (expit(logits) - x) / x.shape[0]
    if out is None:
        grad_w = [np.empty_like(w) for w in model.weights]
        grad_b = [np.empty_like(b) for b in model.biases]
    else:
        grad_w, grad_b = out
    for i in range(len(model.weights) - 1, -1, -1):
        np.matmul(acts[i].T, delta, out=grad_w[i])
        np.sum(delta, axis=0, out=grad_b[i])
        if i:
            delta = delta @ model.weights[i].T
            if not _is_linear(model, i - 1):
                delta *= acts[i] > 0
    return loss, grad_w, grad_b


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


@njit(cache=True, error_model="numpy")
def _adam_kernel(p, g, m, v, lr, b1, b2, c1, c2, eps):
    step = lr / c1
    rc2 = 1.0 / c2
    for i in range(p.size):
        m[i] = b1 * m[i] + (1.0 - b1) * g[i]
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i]
        p[i] -= step * m[i] / (np.sqrt(v[i] * rc2) + eps)


def adam_step(params: list, grads: list, state: AdamState, cfg: TrainConfig) -> None:
    """Bias-corrected Adam update, in place on ``params`` and ``state``."""
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        _adam_kernel(p.reshape(-1), np.ascontiguousarray(g, dtype=np.float64).reshape(-1),
                     m.reshape(-1), v.reshape(-1), cfg.learning_rate, b1, b2, c1, c2, cfg.adam_epsilon)


def _flat_views(arrays):
    flat = np.concatenate([a.ravel() for a in arrays])
    views, pos = [], 0
    for a in arrays:
        views.append(flat[pos:pos + a.size].reshape(a.shape))
        pos += a.size
    return flat, views


def train(x, spec: LayerSpec, cfg: TrainConfig, on_epoch_end=None) -> AutoencoderModel:
    """Train an autoencoder on ``x``.

    Weights and the per-epoch shuffles both draw from stream
    ``(cfg.seed, "autoencoder")``. ``on_epoch_end(epoch, model)`` is called
    after every epoch (1-based) and may be used to snapshot encodings.
    """
    x = as_dense(x, "x")
    n = x.shape[0]
    if np.any((x < 0) | (x > 1)):
        raise ValueError("autoencoder inputs must lie in [0, 1]")
    if cfg.batch_size > n:
        raise ValueError(f"batch_size {cfg.batch_size} exceeds n={n}")
    rng = derive_rng(cfg.seed, "autoencoder")
    model = init_model(x.shape[1], spec, rng)
    # one flat buffer for parameters and one for gradients, so Adam runs as a
    # handful of whole-vector operations per step
    theta, views = _flat_views(model.params())
    model.weights = views[: len(model.weights)]
    model.biases = views[len(model.weights):]
    grad, gviews = _flat_views([np.zeros_like(p) for p in views])
    gout = (gviews[: len(model.weights)], gviews[len(model.weights):])
    state = AdamState.zeros_like([theta])
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for bi, start in enumerate(range(0, n, cfg.batch_size)):
            batch = x[order[start:start + cfg.batch_size]]
            loss, _, _ = backward(model, batch, gout)
            if not np.isfinite(loss):
                raise TrainingError(f"non-finite loss at epoch {epoch}, batch {bi}")
            total += loss * batch.shape[0]
            adam_step([theta], [grad], state, cfg)
        model.loss_history.append(total / n)
        if on_epoch_end is not None:
            on_epoch_end(epoch, model)
    return model


def encode(model: AutoencoderModel, x) -> np.ndarray:
    """Encoder half only: the encoding-layer activations."""
    h = _check_input(model, x)
    for i in range(model.n_encoder):
        h = h @ model.weights[i] + model.biases[i]
        if not _is_linear(model, i):
            h = np.maximum(h, 0.0)
    return h


def save_model(model: AutoencoderModel, path) -> None:
    """Binary checkpoint: magic, u64 layer count, u64 encoder layer count, u8
    linear-encoding flag, then per layer u64 fan_in, u64 fan_out, weights and
    biases as f64 LE."""
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<QQB", len(model.weights), model.n_encoder, int(model.linear_encoding)))
        for w, b in zip(model.weights, model.biases):
            fh.write(struct.pack("<QQ", *w.shape))
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_model(path) -> AutoencoderModel:
    data = Path(path).read_bytes()
    if data[:4] != _CKPT_MAGIC:
        raise ValueError("not an autoencoder checkpoint (bad magic)")
    if len(data) < 21:
        raise ValueError("truncated checkpoint header")
    n_layers, n_enc, flag = struct.unpack_from("<QQB", data, 4)
    if flag > 1 or not 1 <= n_enc < n_layers:
        raise ValueError("corrupt checkpoint header")
    pos = 21
    weights, biases = [], []
    for i in range(n_layers):
        if pos + 16 > len(data):
            raise ValueError(f"truncated checkpoint at layer {i}")
        fi, fo = struct.unpack_from("<QQ", data, pos)
        pos += 16
        need = 8 * (fi * fo + fo)
        if pos + need > len(data):
            raise ValueError(f"truncated checkpoint at layer {i}")
        weights.append(np.frombuffer(data, "<f8", fi * fo, pos).reshape(fi, fo).astype(np.float64))
        pos += 8 * fi * fo
        biases.append(np.frombuffer(data, "<f8", fo, pos).astype(np.float64))
        pos += 8 * fo
    if pos != len(data):
        raise ValueError("trailing bytes in checkpoint")
    return AutoencoderModel(weights, biases, int(n_enc), linear_encoding=bool(flag))
