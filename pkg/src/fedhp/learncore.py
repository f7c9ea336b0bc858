"""Desk-scale classifiers with hand-written gradients and local SGD.

Two model kinds share one flat parameter vector layout:

* ``softmax``: ``W (F x C)`` then ``b (C)``
* ``mlp``: ``W1 (F x H)``, ``b1 (H)``, ``W2 (H x C)``, ``b2 (C)`` with tanh

Loss is mean multiclass cross-entropy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numkit import Rng, l2_norm

LOG_PROB_FLOOR = -30.0
DEFAULT_SIGMA_PROBES = 8

MODEL_KINDS = ("softmax", "mlp")


@dataclass
class Model:
    kind: str
    features: int
    classes: int
    hidden: int = 0
    params: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind == "mlp" and self.hidden < 1:
            raise ValueError("mlp needs hidden >= 1")
        if self.params is None:
            self.params = np.zeros(self.dim)
        self.params = np.asarray(self.params, dtype=float)
        if self.params.shape != (self.dim,):
            raise ValueError(f"params length {self.params.shape} does not match dim {self.dim}")

    @property
    def dim(self) -> int:
        F, C, H = self.features, self.classes, self.hidden
        if self.kind == "softmax":
            return F * C + C
        return F * H + H + H * C + C

    def copy(self) -> "Model":
        return Model(self.kind, self.features, self.classes, self.hidden, self.params.copy())

    def with_params(self, params) -> "Model":
        return Model(self.kind, self.features, self.classes, self.hidden, np.array(params, dtype=float))


def init_model(kind: str, features: int, classes: int, hidden: int = 0, rng: Rng | None = None) -> Model:
    """Zero-initialised softmax, or a small Glorot-scaled MLP (needs ``rng``)."""
    model = Model(kind, features, classes, hidden)
    if kind == "mlp":
        if rng is None:
            raise ValueError("mlp initialisation needs an rng")
        F, C, H = features, classes, hidden
        w1 = rng.normal(0.0, math.sqrt(1.0 / F), size=F * H)
        w2 = rng.normal(0.0, math.sqrt(1.0 / H), size=H * C)
        model.params = np.concatenate([w1, np.zeros(H), w2, np.zeros(C)])
    return model


@dataclass
class Batch:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if len(self.labels) < 1:
            raise ValueError("batch must be nonempty")
        if self.features.shape[0] != len(self.labels):
            raise ValueError("features and labels disagree on batch size")

    @property
    def size(self) -> int:
        return len(self.labels)


@dataclass
class GradEstimates:
    L: float
    sigma: float
    g_norm: float


def _unpack(model: Model):
    F, C, H, p = model.features, model.classes, model.hidden, model.params
    if model.kind == "softmax":
        return p[: F * C].reshape(F, C), p[F * C:]
    o = 0
    w1 = p[o:o + F * H].reshape(F, H); o += F * H
    b1 = p[o:o + H]; o += H
    w2 = p[o:o + H * C].reshape(H, C); o += H * C
    b2 = p[o:o + C]
    return w1, b1, w2, b2


def _log_softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return np.maximum(out, LOG_PROB_FLOOR)


def _check(model: Model, batch: Batch):
    if batch.features.shape[1] != model.features:
        raise ValueError(f"batch has {batch.features.shape[1]} features, model expects {model.features}")
    if batch.labels.min() < 0 or batch.labels.max() >= model.classes:
        raise ValueError("label out of range for model classes")


def logits(model: Model, x: np.ndarray) -> np.ndarray:
    if model.kind == "softmax":
        w, b = _unpack(model)
        return x @ w + b
    w1, b1, w2, b2 = _unpack(model)
    return np.tanh(x @ w1 + b1) @ w2 + b2


def loss_and_gradient(model: Model, batch: Batch) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over ``batch`` and its exact gradient w.r.t. params."""
    _check(model, batch)
    x, y = batch.features, batch.labels
    n = batch.size
    if model.kind == "softmax":
        w, b = _unpack(model)
        z = x @ w + b
    else:
        w1, b1, w2, b2 = _unpack(model)
        a = np.tanh(x @ w1 + b1)
        z = a @ w2 + b2
    logp = _log_softmax(z)
    loss = float(-logp[np.arange(n), y].mean())
    dz = np.exp(logp)
    dz[np.arange(n), y] -= 1.0
    dz /= n
    if model.kind == "softmax":
        return loss, np.concatenate([(x.T @ dz).ravel(), dz.sum(axis=0)])
    da = (dz @ w2.T) * (1.0 - a * a)
    grad = np.concatenate([(x.T @ da).ravel(), da.sum(axis=0), (a.T @ dz).ravel(), dz.sum(axis=0)])
    return loss, grad


def accuracy(model: Model, x: np.ndarray, y: np.ndarray) -> float:
    pred = np.argmax(logits(model, np.asarray(x, dtype=float)), axis=1)
    return float(np.mean(pred == np.asarray(y)))


def estimate_smoothness(grad_fn: Callable[[np.ndarray], np.ndarray], x_start, x_end) -> float | None:
    """Difference-quotient smoothness ``|g(x1) - g(x0)| / |x1 - x0|``.

    Returns None when the points coincide.
    """
    step = np.asarray(x_end, dtype=float) - np.asarray(x_start, dtype=float)
    denom = l2_norm(step)
    if denom == 0.0:
        return None
    return l2_norm(grad_fn(x_end) - grad_fn(x_start)) / denom


def estimate_sigma(model: Model, shard: Batch, batch_size: int, rng: Rng,
                   n_probes: int = DEFAULT_SIGMA_PROBES, full_grad: np.ndarray | None = None) -> float:
    """Root of the mean squared deviation of probe mini-batch gradients from the shard gradient."""
    if full_grad is None:
        full_grad = loss_and_gradient(model, shard)[1]
    total = 0.0
    for _ in range(n_probes):
        idx = rng.choice_without_replacement(shard.size, batch_size)
        g = loss_and_gradient(model, Batch(shard.features[idx], shard.labels[idx]))[1]
        d = g - full_grad
        total += float(np.dot(d, d))
    return math.sqrt(total / n_probes)


def local_update(model: Model, shard: Batch, tau: int, eta: float, batch_size: int, rng: Rng,
                 probe_rng: Rng | None = None, n_probes: int = DEFAULT_SIGMA_PROBES,
                 prev_L: float = 0.0) -> tuple[np.ndarray, GradEstimates, list[float]]:
    """Run ``tau`` mini-batch SGD steps from ``model.params``.

    Mini-batches come from ``rng`` only, so two ``tau=1`` calls sharing a
    stream reproduce one ``tau=2`` call. Sigma probes use ``probe_rng``
    (falls back to ``rng`` after the last step).

    Returns:
        (new params, estimates, per-step mini-batch losses)
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    x_start = model.params.copy()
    work = model.copy()
    trace = []
    for _ in range(tau):
        idx = rng.choice_without_replacement(shard.size, batch_size)
        loss, g = loss_and_gradient(work, Batch(shard.features[idx], shard.labels[idx]))
        trace.append(loss)
        work.params = work.params - eta * g
    x_end = work.params

    g_norm = l2_norm((x_start - x_end) / eta) if eta > 0 else 0.0

    def full_grad(p):
        return loss_and_gradient(model.with_params(p), shard)[1]

    grad_end = full_grad(x_end)
    L = estimate_smoothness(full_grad, x_start, x_end)
    if L is None:
        L = prev_L
    sigma = estimate_sigma(work, shard, batch_size, probe_rng or rng, n_probes, full_grad=grad_end)
    return x_end, GradEstimates(L=float(L), sigma=sigma, g_norm=g_norm), trace
