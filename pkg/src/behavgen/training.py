"""Training engine: four data configurations, a decoupled-weight-decay
adaptive optimizer, and pluggable generalisation methods.

Per-functionality case groups act as training environments; when a phase
mixes suite and i.i.d. data, the i.i.d. pool is one more environment.
Environment-based methods (irm, group-dro, fish) draw one batch per
environment per step; all other methods shuffle the union of environment
batches and take plain sequential steps.
"""

from __future__ import annotations

import hashlib
import itertools
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, NumericError
from .losses import (
    BatchKind,
    PairItem,
    TrainBatch,
    dir_loss_from_logits,
    inv_loss_from_logits,
    make_batches,
    mft_loss_from_logits,
    softmax,
    target_distribution,
)
from .model import Grads, ToyModel, backward, forward, loss_and_grad
from .suite import LabelSpec, MftCase, TestCase, _delta_target

logger = logging.getLogger(__name__)

CONFIGURATIONS = ("IID", "IID->T", "IID+T", "IID->(IID+T)")
METHODS = ("vanilla", "l2", "dropout", "lp", "lp-ft", "irm", "group-dro", "fish")
ENV_METHODS = ("irm", "group-dro", "fish")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from arbitrary labels; independent of ordering
    of unrelated runs."""
    key = "|".join(str(p) for p in parts)
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


@dataclass
class TrainConfig:
    configuration: str = "IID"
    method: str = "vanilla"
    learning_rate: float = 0.02
    batch_size: int = 32
    epochs_phase_a: int = 6
    epochs_phase_b: int = 6
    weight_decay: float = 0.0
    l2_weight_decay: float = 0.1
    dropout_preset: float = 0.3
    irm_weight: float = 1.0
    dro_eta: float = 0.5
    fish_inner_steps: int = 3
    fish_inner_rate: float = 0.02
    fish_meta_rate: float = 0.5
    resample_per_step: bool = False
    lp_ft_frozen_epochs: int | None = None
    seed: int = 0

    def validate(self) -> None:
        if self.configuration not in CONFIGURATIONS:
            raise InvalidInputError(f"unknown configuration {self.configuration!r}")
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.learning_rate <= 0 or self.batch_size < 1:
            raise InvalidInputError("learning rate and batch size must be positive")
        if self.epochs_phase_a < 1 or self.epochs_phase_b < 1:
            raise InvalidInputError("every active phase needs at least one epoch")


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def optimizer_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray],
                   learning_rate: float, weight_decay: float, state: AdamState):
    """Adaptive-moment update with weight decay applied directly to the
    parameters (not through the gradients)."""
    state.t += 1
    t = state.t
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=float)
        if g.shape != p.shape:
            raise InvalidInputError(f"gradient shape mismatch for {name!r}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name!r}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        m_hat = m / (1.0 - ADAM_BETA1 ** t)
        v_hat = v / (1.0 - ADAM_BETA2 ** t)
        p -= learning_rate * (m_hat / (np.sqrt(v_hat) + ADAM_EPS) + weight_decay * p)
    return params


# ---------------------------------------------------------------------------
# method primitives


def _probe_grad_ce(logits: np.ndarray, target: np.ndarray):
    """Scalar-probe gradient of a cross-entropy risk term and its gradient
    w.r.t. the logits.

    For risk(w) = CE(softmax(w * z), t), d(risk)/dw at w=1 is dot(z, p - t).
    """
    z = np.asarray(logits, dtype=float)
    t = np.asarray(target, dtype=float)
    p = softmax(z)
    g = float(np.dot(z, p - t))
    z_bar = float(np.dot(p, z))
    dg = (p - t) + p * (z - z_bar)
    return g, dg


def _probe_grad_dir(logits: np.ndarray, y0: np.ndarray, kind):
    """Scalar-probe gradient for a directional loss term -log(1 - eps)."""
    z = np.asarray(logits, dtype=float)
    p = softmax(z)
    index, sign = _delta_target(kind, np.asarray(y0, dtype=float), p)
    eps = sign * (p[index] - y0[index])
    if eps <= 0.0:
        return 0.0, np.zeros_like(z)
    u = 1.0 - eps
    e_a = np.zeros_like(p)
    e_a[index] = 1.0
    grad_pa = p[index] * (e_a - p)
    z_bar = float(np.dot(p, z))
    za_zb = z[index] - z_bar
    g = sign * p[index] * za_zb / u
    # gradient of (z_a - z_bar)
    v = e_a - p * (1.0 + z - z_bar)
    dg = sign * (grad_pa * za_zb / u
                 + p[index] * v / u
                 + p[index] * za_zb * (sign / u ** 2) * grad_pa)
    return float(g), dg


def irm_penalty(per_env: Sequence[Sequence]) -> float:
    """Invariance penalty: mean over environments of the squared gradient of
    the environment risk in a scalar probe that rescales the logits.

    Each environment is a sequence of (logits, target) pairs where the
    target is a LabelSpec or a probability vector.
    """
    if not per_env:
        raise InvalidInputError("irm_penalty needs at least one environment")
    penalties = []
    for env in per_env:
        if not env:
            raise InvalidInputError("irm_penalty received an empty environment")
        g = 0.0
        for logits, target in env:
            z = np.asarray(logits, dtype=float)
            if isinstance(target, LabelSpec):
                t = target_distribution(target, z.size)
            else:
                t = np.asarray(target, dtype=float)
            g += float(np.dot(z, softmax(z) - t)) / len(env)
        penalties.append(g * g)
    return float(np.mean(penalties))


@dataclass(frozen=True)
class DroState:
    """Exponentiated-gradient weights over training environments."""

    q: np.ndarray
    eta: float

    @staticmethod
    def uniform(n: int, eta: float) -> "DroState":
        return DroState(q=np.full(n, 1.0 / n), eta=float(eta))


def dro_update(per_env_losses, state: DroState):
    """Reweight environments toward the highest loss and return the
    q-weighted loss together with the new state."""
    losses = np.asarray(per_env_losses, dtype=float)
    if losses.size != state.q.size:
        raise InvalidInputError("loss vector length does not match group weights")
    if not np.isfinite(losses).all():
        raise NumericError("non-finite environment loss")
    q = state.q * np.exp(state.eta * losses)
    q = q / q.sum()
    weighted = float(np.dot(q, losses))
    return weighted, DroState(q=q, eta=state.eta)


def fish_step(model: ToyModel, environments: Sequence, inner_steps: int,
              inner_rate: float, meta_rate: float, rng: np.random.Generator,
              mode: str = "train") -> ToyModel:
    """First-order episodic update: sequential inner gradient steps over a
    random permutation of environments, then interpolation back toward the
    start point."""
    if len(environments) < 2:
        logger.warning("fish_step with a single environment; reduces to plain steps")
    theta0 = {name: p.copy() for name, p in model.params().items()}
    perm = rng.permutation(len(environments))
    for k in range(inner_steps):
        env_name, batch = environments[perm[k % len(perm)]]
        loss, grads = loss_and_grad(model, batch, mode, rng)
        gdict = grads.as_dict()
        for name, p in model.params().items():
            if not np.isfinite(gdict[name]).all():
                raise NumericError(f"non-finite gradient for {name!r} (environment {env_name!r})")
            p -= inner_rate * gdict[name]
    for name, p in model.params().items():
        p[:] = theta0[name] + meta_rate * (p - theta0[name])
    return model


# ---------------------------------------------------------------------------
# training loop


def iid_as_cases(iid_examples: Sequence) -> list[TestCase]:
    """Wrap labeled i.i.d. examples as supervised test cases (negative ids
    keep them distinct from suite cases)."""
    cases = []
    for i, (text, label) in enumerate(iid_examples):
        spec = label if isinstance(label, LabelSpec) else LabelSpec.hard(int(label))
        cases.append(TestCase(id=-(i + 1), payload=MftCase(input=text, label=spec)))
    return cases


def _phases(config: TrainConfig, iid_env: dict, suite_envs: dict) -> list[dict]:
    mixture = {**suite_envs, **iid_env}
    if config.configuration == "IID":
        return [{"name": "iid", "envs": iid_env, "epochs": config.epochs_phase_a,
                 "method_active": False}]
    if config.configuration == "IID->T":
        return [
            {"name": "iid", "envs": iid_env, "epochs": config.epochs_phase_a,
             "method_active": False},
            {"name": "suite", "envs": suite_envs, "epochs": config.epochs_phase_b,
             "method_active": True},
        ]
    if config.configuration == "IID+T":
        return [{"name": "suite", "envs": mixture, "epochs": config.epochs_phase_b,
                 "method_active": True}]
    return [
        {"name": "iid", "envs": iid_env, "epochs": config.epochs_phase_a,
         "method_active": False},
        {"name": "suite", "envs": mixture, "epochs": config.epochs_phase_b,
         "method_active": True},
    ]


def _resample_choices(batch: TrainBatch, rng: np.random.Generator) -> TrainBatch:
    if batch.kind not in (BatchKind.INV, BatchKind.DIR_DELTA):
        return batch
    items = tuple(
        replace(item, chosen=int(rng.integers(len(item.perturbed_all))))
        for item in batch.items
    )
    return TrainBatch(kind=batch.kind, items=items)


def _finite_or_raise(grads: Grads, env: str) -> None:
    for name, g in grads.as_dict().items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name!r} (environment {env!r})")


def _irm_batch_terms(model: ToyModel, batch: TrainBatch, rng: np.random.Generator):
    """Environment risk, probe gradient, and both parameter gradients for
    one environment batch."""
    n = len(batch.items)
    risk = 0.0
    g = 0.0
    risk_grads = Grads.zeros_like(model)
    probe_grads = Grads.zeros_like(model)
    for item in batch.items:
        if batch.kind in (BatchKind.MFT, BatchKind.DIR_LABEL):
            _, cache = forward(model, item.x, "train", rng)
            t = target_distribution(item.label, model.classes)
            loss, dlogits = mft_loss_from_logits(cache.logits, item.label)
            gval, dgdz = _probe_grad_ce(cache.logits, t)
        else:
            y0, _ = forward(model, item.x_original, "eval")
            _, cache = forward(model, item.x_perturbed, "train", rng)
            if batch.kind is BatchKind.INV:
                loss, dlogits = inv_loss_from_logits(y0, cache.logits)
                gval, dgdz = _probe_grad_ce(cache.logits, y0)
            else:
                loss, dlogits = dir_loss_from_logits(y0, cache.logits, item.delta)
                gval, dgdz = _probe_grad_dir(cache.logits, y0, item.delta)
        risk += loss / n
        g += gval / n
        backward(model, cache, dlogits / n, risk_grads)
        backward(model, cache, dgdz / n, probe_grads)
    return risk, g, risk_grads, probe_grads


def _epoch_batches(envs: dict, config: TrainConfig, phase_seed: int, epoch: int,
                   featurize) -> dict:
    out = {}
    for env in sorted(envs):
        rng = np.random.default_rng(derive_seed(phase_seed, "batches", epoch, env))
        out[env] = make_batches(envs[env], config.batch_size, rng, featurize)
    return out


def _run_phase_pooled(model, envs, epochs, config, phase_seed, opt_state, weight_decay,
                      featurize, frozen_schedule=None):
    """Plain sequential steps over the shuffled union of environment batches."""
    records = []
    for epoch in range(epochs):
        if frozen_schedule is not None:
            model.frozen_encoder = frozen_schedule(epoch)
        per_env = _epoch_batches(envs, config, phase_seed, epoch, featurize)
        flat = [(env, batch) for env in sorted(per_env) for batch in per_env[env]]
        rng_order = np.random.default_rng(derive_seed(phase_seed, "order", epoch))
        order = rng_order.permutation(len(flat))
        sums: dict = {}
        counts: dict = {}
        for step, pos in enumerate(order):
            env, batch = flat[pos]
            rng_step = np.random.default_rng(derive_seed(phase_seed, "step", epoch, step))
            if config.resample_per_step:
                batch = _resample_choices(batch, rng_step)
            loss, grads = loss_and_grad(model, batch, "train", rng_step)
            _finite_or_raise(grads, env)
            optimizer_step(model.params(), grads.as_dict(), config.learning_rate,
                           weight_decay, opt_state)
            sums[env] = sums.get(env, 0.0) + loss
            counts[env] = counts.get(env, 0) + 1
        env_losses = {env: sums[env] / counts[env] for env in sums}
        records.append({"env_losses": env_losses,
                        "loss": float(np.mean(list(env_losses.values())))})
    return records


def _run_phase_env_method(model, envs, epochs, config, phase_seed, opt_state,
                          weight_decay, featurize):
    """One batch per environment per step; the step count is set by the
    largest environment and smaller ones cycle."""
    names = sorted(envs)
    dro_state = DroState.uniform(len(names), config.dro_eta) if config.method == "group-dro" else None
    records = []
    for epoch in range(epochs):
        per_env = _epoch_batches(envs, config, phase_seed, epoch, featurize)
        steps = max(len(b) for b in per_env.values())
        sums = {name: 0.0 for name in names}
        penalty_sum = 0.0
        for step in range(steps):
            rng_step = np.random.default_rng(derive_seed(phase_seed, "step", epoch, step))
            step_batches = []
            for name in names:
                batch = per_env[name][step % len(per_env[name])]
                if config.resample_per_step:
                    batch = _resample_choices(batch, rng_step)
                step_batches.append((name, batch))
            if config.method == "irm":
                total = Grads.zeros_like(model)
                scale = 1.0 / len(names)
                for name, batch in step_batches:
                    risk, g, risk_grads, probe_grads = _irm_batch_terms(model, batch, rng_step)
                    _finite_or_raise(risk_grads, name)
                    total.add_scaled(risk_grads, scale)
                    total.add_scaled(probe_grads, config.irm_weight * 2.0 * g * scale)
                    sums[name] += risk
                    penalty_sum += config.irm_weight * g * g * scale
                optimizer_step(model.params(), total.as_dict(), config.learning_rate,
                               weight_decay, opt_state)
            elif config.method == "group-dro":
                losses = []
                env_grads = []
                for name, batch in step_batches:
                    loss, grads = loss_and_grad(model, batch, "train", rng_step)
                    _finite_or_raise(grads, name)
                    losses.append(loss)
                    env_grads.append(grads)
                    sums[name] += loss
                weighted, dro_state = dro_update(losses, dro_state)
                total = Grads.zeros_like(model)
                for weight, grads in zip(dro_state.q, env_grads):
                    total.add_scaled(grads, float(weight))
                optimizer_step(model.params(), total.as_dict(), config.learning_rate,
                               weight_decay, opt_state)
            else:  # fish
                fish_step(model, step_batches, config.fish_inner_steps,
                          config.fish_inner_rate, config.fish_meta_rate, rng_step)
                for name, batch in step_batches:
                    loss, _ = loss_and_grad(model, batch, "eval")
                    sums[name] += loss
        env_losses = {name: sums[name] / steps for name in names}
        record = {"env_losses": env_losses, "loss": float(np.mean(list(env_losses.values())))}
        if config.method == "irm":
            record["irm_penalty"] = penalty_sum / steps
        if dro_state is not None:
            record["dro_q"] = {name: float(w) for name, w in zip(names, dro_state.q)}
        records.append(record)
    return records


def run_training(config: TrainConfig, iid_train: Sequence, suite_train,
                 model: ToyModel, featurize: Callable | None = None):
    """Execute one training configuration and return (trained model, history).

    ``suite_train`` maps functionality names to their training cases; a bare
    case list is treated as a single environment.  The input model is not
    mutated.
    """
    config.validate()
    model = model.copy()
    iid_env = {"iid": iid_as_cases(iid_train)} if iid_train else {}
    if isinstance(suite_train, Mapping):
        suite_envs = {name: list(cases) for name, cases in suite_train.items() if cases}
    elif suite_train:
        suite_envs = {"suite": list(suite_train)}
    else:
        suite_envs = {}

    needs_iid = config.configuration in ("IID", "IID->T", "IID+T", "IID->(IID+T)")
    needs_suite = config.configuration != "IID"
    if needs_iid and not iid_env:
        raise InvalidInputError(f"{config.configuration} requires i.i.d. training data")
    if needs_suite and not suite_envs:
        raise InvalidInputError(f"{config.configuration} requires suite training cases")

    # an IRM run with zero penalty weight degenerates to vanilla exactly
    method = config.method
    if method == "irm" and config.irm_weight == 0.0:
        method = "vanilla"

    history = {"configuration": config.configuration, "method": config.method, "phases": []}
    default_dropout = model.dropout_rate
    default_frozen = model.frozen_encoder

    for phase in _phases(config, iid_env, suite_envs):
        # each phase is its own fine-tuning run with a fresh optimizer
        opt_state = AdamState()
        phase_seed = derive_seed(config.seed, "phase", phase["name"])
        active = phase["method_active"]
        weight_decay = config.weight_decay
        frozen_schedule = None
        if active and method == "l2":
            weight_decay = config.l2_weight_decay
        if active and method == "dropout":
            model.dropout_rate = config.dropout_preset
        if active and method == "lp":
            frozen_schedule = lambda epoch: True
        if active and method == "lp-ft":
            frozen = config.lp_ft_frozen_epochs
            if frozen is None:
                frozen = (phase["epochs"] + 1) // 2
            frozen_schedule = lambda epoch, k=frozen: epoch < k
        try:
            if active and method in ENV_METHODS:
                records = _run_phase_env_method(model, phase["envs"], phase["epochs"],
                                                config, phase_seed, opt_state,
                                                weight_decay, featurize)
            else:
                records = _run_phase_pooled(model, phase["envs"], phase["epochs"],
                                            config, phase_seed, opt_state, weight_decay,
                                            featurize, frozen_schedule)
        finally:
            model.dropout_rate = default_dropout
            model.frozen_encoder = default_frozen
        history["phases"].append({
            "name": phase["name"],
            "method_active": active,
            "environments": sorted(phase["envs"]),
            "epochs": records,
            "param_hash": hashlib.sha256(model.param_bytes()).hexdigest(),
        })
    return model, history


def grid_search(base: TrainConfig, grid: Mapping[str, Sequence],
                train_and_score: Callable[[TrainConfig], float]):
    """Loop a config lattice and keep the best-scoring configuration.

    ``train_and_score`` should train with the given config and return the
    selection score (e.g. the validation average pass rate).
    """
    keys = sorted(grid)
    best_config = None
    best_score = -np.inf
    results = []
    for values in itertools.product(*(grid[k] for k in keys)):
        overrides = dict(zip(keys, values))
        candidate = replace(base, **overrides)
        score = train_and_score(candidate)
        results.append((overrides, score))
        if score > best_score:
            best_score = score
            best_config = candidate
    return best_config, results
