"""From-scratch feedforward classifier with manual gradients and Adam.

Rectifier hidden layers, softmax output, mean cross-entropy against hard or
soft labels.  Training runs in two modes: plain risk minimization on the
original points, or mixture training where every step draws fresh convex
combinations of point pairs with matching soft labels.  All randomness flows
through a single seeded generator, so runs are bit-reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .datasets import LabeledDataset
from .mixing import MixingDistribution

__all__ = [
    "AdamState",
    "EvalResult",
    "MixedBatch",
    "MlpModel",
    "TrainHistory",
    "adam_step",
    "evaluate",
    "init_mlp",
    "loss_and_grad",
    "one_hot",
    "sample_mixed_batch",
    "save_history_csv",
    "train",
]


@dataclass
class MlpModel:
    """Feedforward net: ``layer_sizes`` like [n_in, hidden..., k]."""

    layer_sizes: list
    weights: list
    biases: list

    @property
    def k(self) -> int:
        return self.layer_sizes[-1]

    def param_count(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = np.atleast_2d(np.asarray(x, float))
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ w + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Class probabilities per row; rows sum to 1."""
        return _softmax(self.logits(x))


def init_mlp(layer_sizes, seed: int) -> MlpModel:
    """Weights and biases uniform in +-1/sqrt(fan_in); deterministic per seed.

    Biases share the weight law rather than starting at zero: with zero
    biases every hidden rectifier kink sits at the origin of a 1-D input,
    and the net then fails to carve sharp per-point regions on the small
    line datasets.
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise ValueError("need at least input and output layers")
    if any(s < 1 for s in sizes):
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpModel(layer_sizes=sizes, weights=weights, biases=biases)


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def one_hot(labels: np.ndarray, k: int) -> np.ndarray:
    labels = np.asarray(labels, int)
    out = np.zeros((labels.size, k))
    out[np.arange(labels.size), labels - 1] = 1.0
    return out


def loss_and_grad(model: MlpModel, inputs: np.ndarray, labels: np.ndarray):
    """Mean cross-entropy and parameter gradients by backpropagation.

    ``labels`` may be 1-based hard class indices or soft rows on the simplex.
    The softmax/cross-entropy gradient at the logits is (probs - labels)/B.
    """
    x = np.atleast_2d(np.asarray(inputs, float))
    labels = np.asarray(labels)
    if labels.ndim == 1:
        y = one_hot(labels, model.k)
    else:
        y = np.asarray(labels, float)
        if y.shape[1] != model.k:
            raise ValueError(f"soft labels have {y.shape[1]} columns, model has {model.k}")
        if np.any(y < -1e-12) or np.any(np.abs(y.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("soft labels must lie on the probability simplex")
    B = x.shape[0]

    activations = [x]
    h = x
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        h = np.maximum(h @ w + b, 0.0)
        activations.append(h)
    logits = h @ model.weights[-1] + model.biases[-1]

    # loss via logsumexp keeps one-hot-confident models finite
    zmax = logits.max(axis=1, keepdims=True)
    logz = zmax + np.log(np.exp(logits - zmax).sum(axis=1, keepdims=True))
    loss = float(-np.sum(y * (logits - logz)) / B)

    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    delta = (_softmax(logits) - y) / B
    for layer in range(len(model.weights) - 1, -1, -1):
        grad_w[layer] = activations[layer].T @ delta
        grad_b[layer] = delta.sum(axis=0)
        if layer > 0:
            delta = (delta @ model.weights[layer].T) * (activations[layer] > 0.0)
    return loss, (grad_w, grad_b)


@dataclass
class AdamState:
    """First/second moment accumulators plus the shared hyperparameters."""

    m_w: list
    v_w: list
    m_b: list
    v_b: list
    step: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_model(cls, model: MlpModel, lr: float = 0.001) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in model.weights],
            v_w=[np.zeros_like(w) for w in model.weights],
            m_b=[np.zeros_like(b) for b in model.biases],
            v_b=[np.zeros_like(b) for b in model.biases],
            lr=lr,
        )


def adam_step(state: AdamState, model: MlpModel, grads) -> None:
    """One bias-corrected Adam update, in place."""
    grad_w, grad_b = grads
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for i in range(len(model.weights)):
        for params, grad, mom, vel in (
            (model.weights, grad_w, state.m_w, state.v_w),
            (model.biases, grad_b, state.m_b, state.v_b),
        ):
            if grad[i].shape != params[i].shape:
                raise ValueError("gradient/parameter shape mismatch")
            mom[i] = state.beta1 * mom[i] + (1 - state.beta1) * grad[i]
            vel[i] = state.beta2 * vel[i] + (1 - state.beta2) * grad[i] ** 2
            params[i] -= state.lr * (mom[i] / c1) / (np.sqrt(vel[i] / c2) + state.eps)


@dataclass(frozen=True)
class MixedBatch:
    """Convex input combinations with matching soft labels and provenance."""

    inputs: np.ndarray
    soft_labels: np.ndarray
    s_idx: np.ndarray
    t_idx: np.ndarray
    lam: np.ndarray


def sample_mixed_batch(
    ds: LabeledDataset, dist: MixingDistribution, batch_size: int, rng: np.random.Generator
) -> MixedBatch:
    """Uniform ordered pairs (with replacement, diagonal included) and lam ~ dist.

    Same-point and same-class pairs produce one-hot labels automatically,
    since lam*e_i + (1-lam)*e_i = e_i.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    m = ds.m
    s = rng.integers(m, size=batch_size)
    t = rng.integers(m, size=batch_size)
    lam = np.asarray(dist.sample(rng, size=batch_size))
    inputs = lam[:, None] * ds.points[s] + (1.0 - lam)[:, None] * ds.points[t]
    labels = lam[:, None] * one_hot(ds.labels[s], ds.k) + (1.0 - lam)[:, None] * one_hot(
        ds.labels[t], ds.k
    )
    return MixedBatch(inputs=inputs, soft_labels=labels, s_idx=s, t_idx=t, lam=lam)


@dataclass
class EvalResult:
    probs: np.ndarray
    predictions: np.ndarray
    accuracy: float


def evaluate(model: MlpModel, ds: LabeledDataset) -> EvalResult:
    """Per-point probabilities and 0/1 accuracy; ties break to the lowest class."""
    probs = model.forward(ds.points)
    preds = probs.argmax(axis=1) + 1  # argmax takes the first maximum
    acc = float((preds == ds.labels).mean())
    return EvalResult(probs=probs, predictions=preds, accuracy=acc)


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    losses: list = field(default_factory=list)
    train_errors: list = field(default_factory=list)


def train(
    model: MlpModel,
    ds: LabeledDataset,
    mode: str,
    dist: MixingDistribution | None,
    epochs: int,
    seed: int,
    batch_size: int | None = None,
    lr: float = 0.001,
) -> TrainHistory:
    """Train in place; history records loss and error on the *original* points.

    mode 'erm' takes one full-batch step per epoch on the original labeled
    points (or minibatches when batch_size is set); mode 'mixup' draws a fresh
    mixed batch of m samples per epoch.  Identical (arguments, seed) pairs
    produce identical histories.
    """
    if mode not in ("erm", "mixup"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "mixup" and dist is None:
        raise ValueError("mixup mode requires a mixing distribution")
    rng = np.random.default_rng(seed)
    state = AdamState.for_model(model, lr=lr)
    history = TrainHistory()
    m = ds.m
    hard = one_hot(ds.labels, ds.k)
    per_epoch = batch_size if batch_size is not None else m
    steps = max(1, -(-m // per_epoch))  # ceil(m / batch)
    for epoch in range(epochs):
        last_loss = 0.0
        for _ in range(steps):
            if mode == "erm":
                if batch_size is None:
                    bx, by = ds.points, hard
                else:
                    pick = rng.integers(m, size=per_epoch)
                    bx, by = ds.points[pick], hard[pick]
            else:
                batch = sample_mixed_batch(ds, dist, per_epoch, rng)
                bx, by = batch.inputs, batch.soft_labels
            last_loss, grads = loss_and_grad(model, bx, by)
            adam_step(state, model, grads)
        history.epochs.append(epoch)
        history.losses.append(last_loss)
        history.train_errors.append(1.0 - evaluate(model, ds).accuracy)
    return history


def save_history_csv(path, history: TrainHistory) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss", "train_error"])
        for e, l, err in zip(history.epochs, history.losses, history.train_errors):
            writer.writerow([e, repr(float(l)), repr(float(err))])
