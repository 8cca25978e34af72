"""Losses, gradients, optimiser steps and the training loop for every model kind."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .comment_only import CommentOnlyConfig
from .common import GraphInputs, OrdinalPrediction
from .discussion import NUM_LABELS, DiscussionGraph
from .encoder import EncoderSpec, encode_graph
from .gat import GatConfig
from .graphormer import GraphormerConfig
from .layers import check_finite
from .models import Model, ModelConfig, default_config
from .synthgen import random_thread

log = logging.getLogger(__name__)

LOSSES = ("ce", "ordinal_weighted")
OPTIMIZERS = ("sgd", "adam")
_CLASSES = np.arange(NUM_LABELS)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.003
    epochs: int = 10
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    loss: str = "ce"
    l2_penalty: float = 0.0
    init_scale: float = 1.0
    batch_size: int = 8

    def __post_init__(self) -> None:
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be non-negative")
        if not isinstance(self.epochs, int) or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known - {"format_version"}
        if unknown:
            raise ValueError(f"unknown TrainConfig fields: {sorted(unknown)}")
        return cls(**{k: v for k, v in d.items() if k in known})


# -- losses ------------------------------------------------------------------


def _gold_array(gold, n: int) -> np.ndarray:
    g = np.asarray(gold, dtype=np.int64)
    if g.shape != (n,):
        raise ValueError(f"expected {n} gold labels, got shape {g.shape}")
    labeled = g >= 0
    if not labeled.any():
        raise ValueError("no labeled nodes to score")
    if np.any(g[labeled] >= NUM_LABELS):
        raise ValueError("gold label outside 0..4")
    return g


def loss(prediction: OrdinalPrediction, gold, kind: str = "ce") -> float:
    """Mean per-node loss over labeled nodes (``gold < 0`` marks unlabeled).

    ``ce`` is cross-entropy; ``ordinal_weighted`` is the expected absolute
    distance between the predicted class and the gold class.
    """
    probs = np.asarray(prediction.probabilities, dtype=np.float64)
    g = _gold_array(gold, probs.shape[0])
    m = g >= 0
    p, y = probs[m], g[m]
    if kind == "ce":
        return float(np.mean(-np.log(p[np.arange(len(y)), y])))
    if kind == "ordinal_weighted":
        return float(np.mean((p * np.abs(_CLASSES - y[:, None])).sum(axis=1)))
    raise ValueError(f"unknown loss {kind!r}")


def loss_and_grad(logits: np.ndarray, gold: np.ndarray, kind: str) -> tuple[float, np.ndarray]:
    """Loss and its gradient w.r.t. the logits of one graph."""
    g = _gold_array(gold, logits.shape[0])
    m = g >= 0
    count = int(m.sum())
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    tot = e.sum(axis=1, keepdims=True)
    probs = e / tot
    rows = np.nonzero(m)[0]
    y = g[m]
    dlogits = np.zeros_like(logits)
    if kind == "ce":
        value = float(np.sum(np.log(tot[rows, 0]) - z[rows, y])) / count
        d = probs[rows].copy()
        d[np.arange(count), y] -= 1.0
    elif kind == "ordinal_weighted":
        w = np.abs(_CLASSES - y[:, None]).astype(np.float64)
        per = (probs[rows] * w).sum(axis=1)
        value = float(per.sum()) / count
        d = probs[rows] * (w - per[:, None])
    else:
        raise ValueError(f"unknown loss {kind!r}")
    dlogits[rows] = d / count
    return value, dlogits


def _penalised(arr: np.ndarray) -> bool:
    # weight matrices and embedding tables only; gains, offsets and biases are free
    return arr.ndim >= 2


def batch_loss(model: Model, batch: Sequence[tuple[GraphInputs, np.ndarray]], kind: str, l2: float = 0.0) -> float:
    total = 0.0
    for inputs, gold in batch:
        logits, _ = model.forward(inputs, keep_cache=False)
        total += loss_and_grad(logits, gold, kind)[0]
    value = total / len(batch)
    if l2:
        value += 0.5 * l2 * sum(float(np.sum(a * a)) for n, a in model.params.items() if _penalised(a))
    return value


def grads(
    model: Model,
    batch: Sequence[tuple[GraphInputs, np.ndarray]],
    kind: str = "ce",
    l2: float = 0.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean batch loss and its exact gradient for every parameter tensor."""
    if not batch:
        raise ValueError("empty batch")
    acc = {name: np.zeros_like(arr) for name, arr in model.params.items()}
    total = 0.0
    for inputs, gold in batch:
        logits, cache = model.forward(inputs)
        value, dlogits = loss_and_grad(logits, gold, kind)
        if not np.isfinite(value):
            raise FloatingPointError("non-finite loss (check 'logits')")
        total += value
        for name, g in model.backward(cache, dlogits).items():
            acc[name] += g
    scale = 1.0 / len(batch)
    for name in acc:
        acc[name] *= scale
    value = total * scale
    if l2:
        for name, arr in model.params.items():
            if _penalised(arr):
                acc[name] += l2 * arr
                value += 0.5 * l2 * float(np.sum(arr * arr))
    check_finite(acc, "gradient")
    return value, acc


# -- optimisers --------------------------------------------------------------


@dataclass
class OptimizerState:
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def step(
    params: dict[str, np.ndarray],
    gradients: dict[str, np.ndarray],
    config: TrainConfig,
    state: OptimizerState | None = None,
) -> tuple[dict[str, np.ndarray], OptimizerState]:
    state = state or OptimizerState()
    for name, p in params.items():
        if gradients[name].shape != p.shape:
            raise ValueError(f"gradient for {name!r} has shape {gradients[name].shape}, expected {p.shape}")
    lr = config.learning_rate
    if config.optimizer == "sgd":
        new = {name: p - lr * gradients[name] for name, p in params.items()}
        return new, OptimizerState(state.t + 1, state.m, state.v)

    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    c1, c2 = 1.0 - b1**t, 1.0 - b2**t
    new, m_new, v_new = {}, {}, {}
    for name, p in params.items():
        g = gradients[name]
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * g * g
        new[name] = p - lr * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
        m_new[name], v_new[name] = m, v
    return new, OptimizerState(t, m_new, v_new)


# -- training loop -----------------------------------------------------------


def gold_vector(g: DiscussionGraph) -> np.ndarray:
    return np.array([-1 if c.gold_label is None else c.gold_label for c in g.comments], dtype=np.int64)


def prepare(graphs: Sequence[DiscussionGraph], encoder: EncoderSpec) -> list[tuple[GraphInputs, np.ndarray]]:
    """Encode labeled graphs; unlabeled graphs are skipped with a warning."""
    out = []
    for g in graphs:
        gold = gold_vector(g)
        if not (gold >= 0).any():
            log.warning("skipping unlabeled thread %r", g.thread_id)
            continue
        out.append((GraphInputs.from_graph(g, encode_graph(g, encoder)), gold))
    return out


@dataclass
class TrainResult:
    model: Model
    history: list[float]

    def history_dict(self) -> dict:
        return {"format_version": 1, "model_kind": self.model.kind, "loss_history": self.history}


def train(
    graphs: Sequence[DiscussionGraph],
    kind: str,
    train_config: TrainConfig,
    encoder: EncoderSpec | None = None,
    model_config: ModelConfig | None = None,
    data: list[tuple[GraphInputs, np.ndarray]] | None = None,
) -> TrainResult:
    """Train one model; fully determined by the seed, corpus and configs.

    ``data`` may carry already-encoded graphs (from :func:`prepare`) to avoid
    re-encoding when several models share a corpus.
    """
    encoder = encoder or EncoderSpec()
    model_config = model_config or default_config(kind, encoder.dim)
    if data is None:
        data = prepare(graphs, encoder)
    if not data:
        raise ValueError("no labeled graphs to train on")
    rng = np.random.default_rng(train_config.seed)
    model = Model.initialize(kind, model_config, encoder, rng, train_config.init_scale)
    state = OptimizerState()
    history = []
    bs = train_config.batch_size
    for epoch in range(train_config.epochs):
        order = rng.permutation(len(data))
        epoch_total = 0.0
        for start in range(0, len(order), bs):
            batch = [data[i] for i in order[start : start + bs]]
            value, g = grads(model, batch, train_config.loss, 0.0)
            if train_config.l2_penalty:
                for name, arr in model.params.items():
                    if _penalised(arr):
                        g[name] = g[name] + train_config.l2_penalty * arr
            epoch_total += value * len(batch)
            model.params, state = step(model.params, g, train_config, state)
        history.append(epoch_total / len(data))
        log.info("%s epoch %d/%d loss %.5f", kind, epoch + 1, train_config.epochs, history[-1])
    return TrainResult(model, history)


def load_train_config(path) -> TrainConfig:
    with open(path, encoding="utf-8") as fh:
        return TrainConfig.from_dict(json.load(fh))


# -- finite-difference verification ------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_tensor: str
    worst_index: tuple[int, ...]
    per_tensor: dict[str, float]
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance


def relative_error(a, b) -> np.ndarray:
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


def gradient_check(
    model: Model,
    batch: Sequence[tuple[GraphInputs, np.ndarray]],
    kind: str = "ce",
    h: float = 1e-5,
    l2: float = 0.0,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients with central differences on every coordinate."""
    _, analytic = grads(model, batch, kind, l2)
    per_tensor = {}
    worst = (-1.0, "", ())
    for name in list(model.params):
        arr = model.params[name] = np.ascontiguousarray(model.params[name])
        numeric = np.zeros_like(arr)
        flat = arr.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = batch_loss(model, batch, kind, l2)
            flat[i] = orig - h
            down = batch_loss(model, batch, kind, l2)
            flat[i] = orig
            numeric.reshape(-1)[i] = (up - down) / (2 * h)
        err = relative_error(analytic[name], numeric)
        per_tensor[name] = float(err.max()) if err.size else 0.0
        if err.size and err.max() > worst[0]:
            worst = (float(err.max()), name, np.unravel_index(int(err.argmax()), err.shape))
    return GradCheckReport(worst[0], worst[1], tuple(int(i) for i in worst[2]), per_tensor, tolerance)


def tiny_config(kind: str, input_dim: int) -> ModelConfig:
    """Small model used for finite-difference checks."""
    if kind == "graphormer":
        return GraphormerConfig(input_dim=input_dim, num_layers=2, num_heads=2, model_dim=8, ffn_dim=16)
    if kind == "gat":
        return GatConfig(input_dim=input_dim, num_layers=2, num_heads=2, model_dim=8)
    if kind == "comment_only":
        return CommentOnlyConfig(input_dim=input_dim, hidden_dim=8)
    raise ValueError(f"unknown model kind {kind!r}")


def self_check(
    seed: int,
    kind: str,
    loss_kind: str = "ce",
    num_nodes: int = 7,
    input_dim: int = 16,
    l2: float = 0.0,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Gradient check of a tiny ``kind`` model on a seeded random thread."""
    rng = np.random.default_rng(seed)
    g = random_thread(rng, num_nodes)
    encoder = EncoderSpec(dim=input_dim)
    model = Model.initialize(kind, tiny_config(kind, input_dim), encoder, rng)
    # move off the initial point so zero-initialised tensors are exercised too
    for name, arr in model.params.items():
        model.params[name] = arr + rng.normal(0.0, 0.1, arr.shape)
    batch = prepare([g], encoder)
    return gradient_check(model, batch, loss_kind, l2=l2, tolerance=tolerance)
