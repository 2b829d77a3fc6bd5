"""Differentiable losses for behavioural training, batch construction, and
the common-ground alignment used for span-prediction invariance.

Every loss comes in two flavours: a value-only form on probability vectors
and a ``*_from_logits`` form that also returns the analytic gradient with
respect to the logits.  Original predictions are always treated as constant
targets: gradients flow into the perturbed input's logits only.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInputError, InvalidInputError
from .suite import (
    DeltaKind,
    DirCase,
    InvCase,
    LabelSpec,
    MftCase,
    TestCase,
    _delta_target,
    as_prediction,
    epsilon,
)

LOG_FLOOR = 1e-12
EPSILON_CEIL = 1.0 - 1e-9


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def entropy(probs) -> float:
    p = np.asarray(probs, dtype=float)
    return float(-(p * np.log(np.maximum(p, LOG_FLOOR))).sum())


def target_distribution(spec: LabelSpec, num_classes: int) -> np.ndarray:
    """Training target for a label: one-hot, the soft vector, or [1/3, 2/3]
    for 'not negative'."""
    if spec.kind == "hard":
        if spec.class_index is None or not 0 <= spec.class_index < num_classes:
            raise InvalidInputError("hard label index out of range")
        t = np.zeros(num_classes)
        t[spec.class_index] = 1.0
        return t
    if spec.kind == "soft":
        t = np.asarray(spec.probs, dtype=float)
        if t.size != num_classes:
            raise InvalidInputError("soft label dimension mismatch")
        return t
    if spec.kind == "not_negative":
        if num_classes != 2:
            raise InvalidInputError("not_negative targets require a 2-class task")
        return np.array([1.0 / 3.0, 2.0 / 3.0])
    raise InvalidInputError(f"unknown label kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# losses on probability vectors


def _cross_entropy(target: np.ndarray, probs: np.ndarray) -> float:
    return float(-(target * np.log(np.maximum(probs, LOG_FLOOR))).sum())


def mft_loss(pred, target: LabelSpec) -> float:
    """Cross-entropy between a prediction and its (possibly soft) label."""
    p = as_prediction(pred)
    t = target_distribution(target, p.size)
    return _cross_entropy(t, p)


def inv_loss(y0, yi) -> float:
    """Cross-entropy of the perturbed prediction against the original one.

    Minimised at ``yi == y0`` where it equals the entropy of ``y0``.
    """
    a = as_prediction(y0)
    b = as_prediction(yi)
    if a.size != b.size:
        raise InvalidInputError("prediction dimension mismatch")
    return _cross_entropy(a, b)


def dir_loss(y0, yi, kind: DeltaKind) -> float:
    """-log(1 - epsilon): zero exactly when the directional test passes."""
    e = min(epsilon(kind, y0, yi), EPSILON_CEIL)
    return float(-np.log1p(-e))


# ---------------------------------------------------------------------------
# losses with gradients w.r.t. logits


def mft_loss_from_logits(logits, target: LabelSpec):
    p = softmax(logits)
    t = target_distribution(target, p.size)
    return _cross_entropy(t, p), p - t


def inv_loss_from_logits(y0, logits):
    a = as_prediction(y0)
    p = softmax(logits)
    if a.size != p.size:
        raise InvalidInputError("prediction dimension mismatch")
    return _cross_entropy(a, p), p - a


def dir_loss_from_logits(y0, logits, kind: DeltaKind):
    a = as_prediction(y0)
    p = softmax(logits)
    index, sign = _delta_target(kind, a, p)
    e = sign * (p[index] - a[index])
    if e <= 0.0:
        return 0.0, np.zeros_like(p)
    e = min(e, EPSILON_CEIL)
    loss = float(-np.log1p(-e))
    # d/dz of -log(1 - e) with e = sign * (softmax(z)[index] - const)
    grad_pa = p[index] * (_one_hot(index, p.size) - p)
    grad = (sign / (1.0 - e)) * grad_pa
    return loss, grad


def _one_hot(index: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    v[index] = 1.0
    return v


# ---------------------------------------------------------------------------
# common-ground alignment and span-invariance loss


@dataclass(frozen=True)
class AlignmentMap:
    """Index pairs linking identical tokens of an original/perturbed pair.

    Pairs are strictly increasing in both coordinates.
    """

    pairs: tuple

    def original_indices(self) -> list[int]:
        return [i for i, _ in self.pairs]

    def perturbed_indices(self) -> list[int]:
        return [j for _, j in self.pairs]

    def __len__(self) -> int:
        return len(self.pairs)


def common_ground_alignment(orig_tokens: Sequence[str], pert_tokens: Sequence[str]) -> AlignmentMap:
    """Longest common subsequence over exact token equality.

    Ties prefer the earliest original index, then the earliest perturbed
    index, which makes the alignment deterministic.
    """
    n, m = len(orig_tokens), len(pert_tokens)
    # suffix[i][j] = LCS length of orig_tokens[i:] vs pert_tokens[j:]
    suffix = np.zeros((n + 1, m + 1), dtype=np.int32)
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if orig_tokens[i] == pert_tokens[j]:
                suffix[i, j] = suffix[i + 1, j + 1] + 1
            else:
                suffix[i, j] = max(suffix[i + 1, j], suffix[i, j + 1])
    pairs = []
    i = j = 0
    while i < n and j < m:
        if orig_tokens[i] == pert_tokens[j] and suffix[i, j] == suffix[i + 1, j + 1] + 1:
            pairs.append((i, j))
            i += 1
            j += 1
        elif suffix[i, j + 1] == suffix[i, j]:
            j += 1
        else:
            i += 1
    return AlignmentMap(pairs=tuple(pairs))


def _restrict(dist: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    sub = dist[np.asarray(indices, dtype=int)]
    total = sub.sum()
    if total <= 0.0:
        # all mass outside the common ground; fall back to uniform
        return np.full(len(indices), 1.0 / len(indices))
    return sub / total


def span_inv_loss(orig_start, orig_end, pert_start, pert_end, amap: AlignmentMap) -> float:
    """Cross-entropy between original and perturbed span distributions,
    restricted to aligned positions and renormalized, summed over the start
    and end heads."""
    if len(amap) == 0:
        raise DegenerateInputError("alignment map is empty; no common ground to compare")
    o_idx = amap.original_indices()
    p_idx = amap.perturbed_indices()
    total = 0.0
    for orig, pert in ((orig_start, pert_start), (orig_end, pert_end)):
        o = as_prediction(orig)
        p = as_prediction(pert)
        if max(o_idx) >= o.size or max(p_idx) >= p.size:
            raise InvalidInputError("alignment map exceeds distribution length")
        total += _cross_entropy(_restrict(o, o_idx), _restrict(p, p_idx))
    return float(total)


def span_inv_loss_from_logits(orig_start, orig_end, pert_start_logits, pert_end_logits,
                              amap: AlignmentMap):
    """Span-invariance loss with gradients w.r.t. the perturbed logits.

    The gradient of each head is (restricted renormalized probs - restricted
    original) on aligned positions and zero elsewhere.
    """
    if len(amap) == 0:
        raise DegenerateInputError("alignment map is empty; no common ground to compare")
    o_idx = np.asarray(amap.original_indices(), dtype=int)
    p_idx = np.asarray(amap.perturbed_indices(), dtype=int)
    total = 0.0
    grads = []
    for orig, logits in ((orig_start, pert_start_logits), (orig_end, pert_end_logits)):
        o = as_prediction(orig)
        z = np.asarray(logits, dtype=float)
        if o_idx.max() >= o.size or p_idx.max() >= z.size:
            raise InvalidInputError("alignment map exceeds distribution length")
        p = softmax(z)
        o_r = _restrict(o, o_idx)
        p_r = _restrict(p, p_idx)
        total += _cross_entropy(o_r, p_r)
        grad = np.zeros_like(z)
        grad[p_idx] = p_r - o_r
        grads.append(grad)
    return float(total), grads[0], grads[1]


# ---------------------------------------------------------------------------
# batch construction


class BatchKind(str, Enum):
    MFT = "MFT"
    INV = "INV"
    DIR_DELTA = "DIR_DELTA"
    DIR_LABEL = "DIR_LABEL"


@dataclass(frozen=True)
class MftItem:
    case_id: int
    x: object
    label: LabelSpec


@dataclass(frozen=True)
class PairItem:
    """An original/perturbed feature pair; ``delta`` is None for INV items.

    All perturbed versions are kept so a trainer may re-draw ``chosen``
    per step instead of per epoch.
    """

    case_id: int
    x_original: object
    perturbed_all: tuple
    chosen: int
    delta: DeltaKind | None = None

    @property
    def x_perturbed(self):
        return self.perturbed_all[self.chosen]


@dataclass(frozen=True)
class TrainBatch:
    kind: BatchKind
    items: tuple

    def __len__(self) -> int:
        return len(self.items)


def _identity(value):
    return value


def make_batches(split: Sequence[TestCase], batch_size: int, rng: np.random.Generator,
                 featurize: Callable | None = None) -> list[TrainBatch]:
    """Shuffle cases and chunk them into kind-homogeneous batches.

    INV and delta-form DIR cases contribute one uniformly sampled perturbed
    version each; label-form DIR cases expand into one supervised item per
    perturbed input.
    """
    if batch_size < 1:
        raise InvalidInputError("batch_size must be >= 1")
    if not split:
        raise InvalidInputError("cannot build batches from an empty split")
    feat = featurize or _identity
    order = rng.permutation(len(split))
    buckets: dict = {kind: [] for kind in BatchKind}
    for pos in order:
        case = split[pos]
        payload = case.payload
        if isinstance(payload, MftCase):
            buckets[BatchKind.MFT].append(MftItem(case.id, feat(payload.input), payload.label))
        elif isinstance(payload, InvCase):
            chosen = int(rng.integers(len(payload.perturbed)))
            buckets[BatchKind.INV].append(
                PairItem(case.id, feat(payload.original),
                         tuple(feat(p) for p in payload.perturbed), chosen)
            )
        elif isinstance(payload, DirCase) and payload.delta is not None:
            chosen = int(rng.integers(len(payload.perturbed)))
            buckets[BatchKind.DIR_DELTA].append(
                PairItem(case.id, feat(payload.original),
                         tuple(feat(p) for p in payload.perturbed), chosen, payload.delta)
            )
        else:
            for pert in payload.perturbed:
                buckets[BatchKind.DIR_LABEL].append(MftItem(case.id, feat(pert), payload.label))
    batches = []
    for kind in BatchKind:
        items = buckets[kind]
        for start in range(0, len(items), batch_size):
            batches.append(TrainBatch(kind=kind, items=tuple(items[start:start + batch_size])))
    return batches
