"""A small two-block softmax classifier over hashed bag-of-n-gram features.

The first block (w1, b1) plays the role of an encoder and the second
(w2, b2) the classification head, so freezing the encoder gives linear
probing a literal meaning at this scale.  Everything is explicit numpy:
forward, backward, and a bit-exact checkpoint format.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInputError, NumericError
from .losses import (
    BatchKind,
    TrainBatch,
    dir_loss_from_logits,
    inv_loss_from_logits,
    mft_loss_from_logits,
    softmax,
)

DEFAULT_DIM = 4096
DEFAULT_HIDDEN = 32

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


@dataclass(frozen=True)
class Features:
    """Sparse feature vector: sorted indices with non-negative counts."""

    indices: np.ndarray
    values: np.ndarray

    @staticmethod
    def from_counts(counts: dict) -> "Features":
        if not counts:
            return Features(np.zeros(0, dtype=np.int64), np.zeros(0))
        idx = np.array(sorted(counts), dtype=np.int64)
        val = np.array([counts[i] for i in idx], dtype=float)
        return Features(idx, val)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)


def _ngram_counts(text: str, dim: int, offset: int = 0) -> dict:
    tokens = text.split()
    counts: dict = {}
    for tok in tokens:
        key = offset + fnv1a64(tok.encode("utf-8")) % dim
        counts[key] = counts.get(key, 0.0) + 1.0
    for first, second in zip(tokens, tokens[1:]):
        key = offset + fnv1a64(f"{first} {second}".encode("utf-8")) % dim
        counts[key] = counts.get(key, 0.0) + 1.0
    return counts


def featurize_text(text: str, dim: int = DEFAULT_DIM) -> Features:
    """Hash unigrams and bigrams of whitespace tokens into ``dim`` buckets."""
    return Features.from_counts(_ngram_counts(text, dim))


def featurize_pair(text_a: str, text_b: str, dim: int = DEFAULT_DIM) -> Features:
    """Pair features: [A | B | elementwise |A - B|], dimension 3 * dim."""
    a = _ngram_counts(text_a, dim)
    b = _ngram_counts(text_b, dim)
    counts: dict = dict(a)
    for key, value in b.items():
        counts[key + dim] = value
    for key in set(a) | set(b):
        diff = abs(a.get(key, 0.0) - b.get(key, 0.0))
        if diff > 0.0:
            counts[key + 2 * dim] = diff
    return Features.from_counts(counts)


def make_featurizer(task: str, dim: int = DEFAULT_DIM) -> Callable:
    """Memoized featurizer for ``single`` or ``pair`` inputs."""
    if task not in ("single", "pair"):
        raise InvalidInputError(f"unknown task kind {task!r}")
    cache: dict = {}

    def featurize(value):
        feats = cache.get(value)
        if feats is None:
            if task == "pair":
                if not (isinstance(value, tuple) and len(value) == 2):
                    raise InvalidInputError("pair task inputs must be (text_a, text_b)")
                feats = featurize_pair(value[0], value[1], dim)
            else:
                if not isinstance(value, str):
                    raise InvalidInputError("single-text task inputs must be strings")
                feats = featurize_text(value, dim)
            cache[value] = feats
        return feats

    featurize.input_dim = 3 * dim if task == "pair" else dim  # type: ignore[attr-defined]
    return featurize


# ---------------------------------------------------------------------------
# model


@dataclass
class ToyModel:
    w1: np.ndarray  # (input_dim, hidden)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden, classes)
    b2: np.ndarray  # (classes,)
    dropout_rate: float = 0.1
    frozen_encoder: bool = False

    @property
    def input_dim(self) -> int:
        return self.w1.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def classes(self) -> int:
        return self.w2.shape[1]

    def copy(self) -> "ToyModel":
        return ToyModel(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy(),
                        self.dropout_rate, self.frozen_encoder)

    def params(self) -> dict:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def param_bytes(self) -> bytes:
        return b"".join(np.ascontiguousarray(a, dtype=np.float64).tobytes()
                        for a in (self.w1, self.b1, self.w2, self.b2))


def init_model(input_dim: int, hidden: int = DEFAULT_HIDDEN, classes: int = 2,
               rng: np.random.Generator | None = None, dropout_rate: float = 0.1) -> ToyModel:
    rng = rng or np.random.default_rng(0)
    if not 0.0 <= dropout_rate < 1.0:
        raise InvalidInputError("dropout_rate must be in [0, 1)")
    w1 = rng.normal(0.0, 0.05, size=(input_dim, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, classes))
    b2 = np.zeros(classes)
    return ToyModel(w1, b1, w2, b2, dropout_rate=dropout_rate)


@dataclass
class Cache:
    features: Features
    h_pre: np.ndarray
    mask: np.ndarray | None
    h: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def forward(model: ToyModel, feats: Features, mode: str = "eval",
            rng: np.random.Generator | None = None):
    """Run the network; train mode applies inverted dropout on the hidden
    layer.  Returns (probs, cache)."""
    if feats.nnz and feats.indices.max() >= model.input_dim:
        raise InvalidInputError("feature index out of range for model input dimension")
    if feats.nnz:
        h_pre = feats.values @ model.w1[feats.indices] + model.b1
    else:
        h_pre = model.b1.copy()
    h = np.maximum(h_pre, 0.0)
    mask = None
    if mode == "train" and model.dropout_rate > 0.0:
        if rng is None:
            raise InvalidInputError("train-mode forward needs an rng for dropout")
        mask = (rng.random(model.hidden) >= model.dropout_rate).astype(float)
        h = h * mask / (1.0 - model.dropout_rate)
    logits = h @ model.w2 + model.b2
    if not np.isfinite(logits).all():
        raise NumericError("non-finite logits; model parameters may be corrupt")
    probs = softmax(logits)
    return probs, Cache(feats, h_pre, mask, h, logits, probs)


@dataclass
class Grads:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    @staticmethod
    def zeros_like(model: ToyModel) -> "Grads":
        return Grads(np.zeros_like(model.w1), np.zeros_like(model.b1),
                     np.zeros_like(model.w2), np.zeros_like(model.b2))

    def as_dict(self) -> dict:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def add_scaled(self, other: "Grads", scale: float = 1.0) -> None:
        self.w1 += scale * other.w1
        self.b1 += scale * other.b1
        self.w2 += scale * other.w2
        self.b2 += scale * other.b2

    def scale(self, factor: float) -> None:
        self.w1 *= factor
        self.b1 *= factor
        self.w2 *= factor
        self.b2 *= factor

    def max_abs(self) -> float:
        return max(float(np.abs(a).max()) if a.size else 0.0
                   for a in (self.w1, self.b1, self.w2, self.b2))


def backward(model: ToyModel, cache: Cache, dlogits: np.ndarray,
             grads: Grads | None = None) -> Grads:
    """Chain rule back through the head, dropout mask and relu.

    Accumulates into ``grads`` when given.  Frozen encoders receive exactly
    zero gradient on (w1, b1).
    """
    dlogits = np.asarray(dlogits, dtype=float)
    if dlogits.shape != (model.classes,):
        raise InvalidInputError("upstream gradient shape does not match the model head")
    if cache.h.shape != (model.hidden,):
        raise InvalidInputError("cache does not match this model")
    out = grads or Grads.zeros_like(model)
    out.w2 += np.outer(cache.h, dlogits)
    out.b2 += dlogits
    if not model.frozen_encoder:
        dh = model.w2 @ dlogits
        if cache.mask is not None:
            dh = dh * cache.mask / (1.0 - model.dropout_rate)
        dh_pre = dh * (cache.h_pre > 0.0)
        out.b1 += dh_pre
        feats = cache.features
        if feats.nnz:
            out.w1[feats.indices] += np.outer(feats.values, dh_pre)
    return out


def item_loss_grad(model: ToyModel, item, kind: BatchKind, mode: str = "eval",
                   rng: np.random.Generator | None = None):
    """Loss value and d(loss)/d(logits) for one batch item, plus the forward
    cache of the input that receives gradient."""
    if kind in (BatchKind.MFT, BatchKind.DIR_LABEL):
        probs, cache = forward(model, item.x, mode, rng)
        loss, dlogits = mft_loss_from_logits(cache.logits, item.label)
        return loss, dlogits, cache
    y0, _ = forward(model, item.x_original, "eval")
    probs, cache = forward(model, item.x_perturbed, mode, rng)
    if kind is BatchKind.INV:
        loss, dlogits = inv_loss_from_logits(y0, cache.logits)
    else:
        loss, dlogits = dir_loss_from_logits(y0, cache.logits, item.delta)
    return loss, dlogits, cache


def loss_and_grad(model: ToyModel, batch: TrainBatch, mode: str = "eval",
                  rng: np.random.Generator | None = None):
    """Mean loss and parameter gradients over one homogeneous batch.

    For INV and delta-form DIR items the original input's prediction is a
    constant target: only the perturbed forward pass contributes gradients.
    """
    if not batch.items:
        raise InvalidInputError("empty batch")
    grads = Grads.zeros_like(model)
    total = 0.0
    scale = 1.0 / len(batch.items)
    for item in batch.items:
        loss, dlogits, cache = item_loss_grad(model, item, batch.kind, mode, rng)
        total += loss * scale
        backward(model, cache, dlogits * scale, grads)
    return total, grads


def predict_proba(model: ToyModel, feats: Features) -> np.ndarray:
    probs, _ = forward(model, feats, "eval")
    return probs


# ---------------------------------------------------------------------------
# checkpoints (bit-exact round trip)

_MAGIC = b"BGCKPT1\n"


def save_model(model: ToyModel, path) -> None:
    header = {
        "input_dim": model.input_dim,
        "hidden": model.hidden,
        "classes": model.classes,
        "dropout_rate": model.dropout_rate,
        "frozen_encoder": model.frozen_encoder,
    }
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        fh.write(model.param_bytes())


def load_model(path) -> ToyModel:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise InvalidInputError(f"not a model checkpoint: {path}")
        (head_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(head_len).decode("utf-8"))
        blob = fh.read()
    d, h, c = header["input_dim"], header["hidden"], header["classes"]
    sizes = [d * h, h, h * c, c]
    if len(blob) != 8 * sum(sizes):
        raise InvalidInputError("checkpoint payload has unexpected size")
    arrays = []
    offset = 0
    for size, shape in zip(sizes, [(d, h), (h,), (h, c), (c,)]):
        arrays.append(np.frombuffer(blob, dtype=np.float64, count=size,
                                    offset=offset).reshape(shape).copy())
        offset += 8 * size
    return ToyModel(*arrays, dropout_rate=header["dropout_rate"],
                    frozen_encoder=header["frozen_encoder"])
