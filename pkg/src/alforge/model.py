"""Two-layer softmax classifier with exact analytic gradients.

The network is x -> act(W1 x + b1) -> softmax(W2 h + b2). The hidden
activation doubles as the feature embedding used by diversity-based
selection. Training minimizes mean cross-entropy on labeled batches plus
a weighted consistency penalty tying predictions on augmented copies of
unlabeled samples to the (frozen) prediction on the clean sample.

Everything is float64 numpy, single threaded, and deterministic given a
seed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

# Probabilities are clamped here before any log so losses stay finite.
PROB_FLOOR = 1e-12

ACTIVATIONS = ("relu", "tanh")
DISTANCES = ("squared_l2", "kl_divergence")

SeedLike = int | Sequence[int]


@dataclass
class ModelParams:
    """All weights of the classifier. Arrays are float64 and never aliased
    across training steps (updates return fresh instances)."""

    W1: np.ndarray  # (hidden_dim, input_dim)
    b1: np.ndarray  # (hidden_dim,)
    W2: np.ndarray  # (n_classes, hidden_dim)
    b2: np.ndarray  # (n_classes,)
    activation: str = "tanh"

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.W2.shape[0]

    def validate(self) -> None:
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        h, d = self.W1.shape
        j, h2 = self.W2.shape
        if h2 != h or self.b1.shape != (h,) or self.b2.shape != (j,):
            raise ValueError("parameter shapes are inconsistent")
        for t in (self.W1, self.b1, self.W2, self.b2):
            if not np.all(np.isfinite(t)):
                raise FloatingPointError("non-finite model parameter")

    def copy(self) -> "ModelParams":
        return ModelParams(self.W1.copy(), self.b1.copy(),
                           self.W2.copy(), self.b2.copy(), self.activation)


@dataclass
class Gradients:
    """Gradient (or velocity) with the same tensor layout as ModelParams."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(t)) for t in (self.W1, self.b1, self.W2, self.b2))

    def scaled(self, s: float) -> "Gradients":
        return Gradients(s * self.W1, s * self.b1, s * self.W2, s * self.b2)

    def __add__(self, other: "Gradients") -> "Gradients":
        return Gradients(self.W1 + other.W1, self.b1 + other.b1,
                         self.W2 + other.W2, self.b2 + other.b2)


@dataclass
class LossSpec:
    """Hyperparameters of the composite training loss."""

    distance: str = "squared_l2"
    unsup_weight: float = 1.0
    n_train_augs: int = 1

    def validate(self) -> None:
        if self.distance not in DISTANCES:
            raise ValueError(f"unknown distance {self.distance!r}")
        if self.unsup_weight < 0:
            raise ValueError("unsup_weight must be >= 0")
        if self.n_train_augs < 1:
            raise ValueError("n_train_augs must be >= 1")


@dataclass
class Prediction:
    logits: np.ndarray
    probs: np.ndarray
    hidden: np.ndarray


def zero_grads(params: ModelParams) -> Gradients:
    return Gradients(np.zeros_like(params.W1), np.zeros_like(params.b1),
                     np.zeros_like(params.W2), np.zeros_like(params.b2))


def init_params(seed: SeedLike, input_dim: int, hidden_dim: int, n_classes: int,
                scale: float = 0.3, activation: str = "tanh") -> ModelParams:
    """Weights i.i.d. uniform in [-scale, scale], biases zero. Same seed
    gives bit-identical parameters."""
    if min(input_dim, hidden_dim, n_classes) < 1:
        raise ValueError("all dimensions must be positive")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    rng = np.random.default_rng(seed)
    W1 = rng.uniform(-scale, scale, (hidden_dim, input_dim))
    W2 = rng.uniform(-scale, scale, (n_classes, hidden_dim))
    return ModelParams(W1, np.zeros(hidden_dim), W2, np.zeros(n_classes), activation)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (log-sum-exp shifted)."""
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(z: np.ndarray, h: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        # subgradient 0 at the kink
        return (z > 0.0).astype(z.dtype)
    return 1.0 - h * h


def _forward_full(params: ModelParams, X: np.ndarray):
    """Forward pass on a (n, input_dim) batch, keeping intermediates."""
    Z1 = X @ params.W1.T + params.b1
    H = _activate(Z1, params.activation)
    Z2 = H @ params.W2.T + params.b2
    return Z1, H, Z2, softmax(Z2)


def forward(params: ModelParams, x: np.ndarray) -> Prediction:
    """Predict a single sample. The hidden activation is the feature
    embedding used for distance-based selection."""
    x = np.asarray(x, dtype=float)
    if x.shape != (params.input_dim,):
        raise ValueError(f"expected input of shape ({params.input_dim},), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    _, h, z2, p = _forward_full(params, x[None, :])
    return Prediction(logits=z2[0], probs=p[0], hidden=h[0])


def predict_probs(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Softmax probabilities for a (n, input_dim) batch."""
    return _forward_full(params, np.asarray(X, dtype=float))[3]


def hidden_features(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Hidden-layer embeddings for a (n, input_dim) batch."""
    return _forward_full(params, np.asarray(X, dtype=float))[1]


def _one_hot(y: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((len(y), n_classes))
    out[np.arange(len(y)), y] = 1.0
    return out


def supervised_loss(params: ModelParams, X: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy -log p[label] over the batch."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(X) == 0:
        raise ValueError("supervised loss over an empty batch is undefined")
    if y.min() < 0 or y.max() >= params.n_classes:
        raise ValueError("label out of range")
    probs = predict_probs(params, X)
    py = probs[np.arange(len(y)), y]
    return float(-np.log(np.maximum(py, PROB_FLOOR)).mean())


def probability_distance(reference: np.ndarray, candidate: np.ndarray, kind: str) -> float:
    """Distance between two probability vectors; `reference` plays the role
    of the frozen clean-sample prediction."""
    reference = np.asarray(reference, dtype=float)
    candidate = np.asarray(candidate, dtype=float)
    if kind == "squared_l2":
        return float(((reference - candidate) ** 2).sum())
    if kind == "kl_divergence":
        q = np.maximum(reference, PROB_FLOOR)
        p = np.maximum(candidate, PROB_FLOOR)
        return float((q * (np.log(q) - np.log(p))).sum())
    raise ValueError(f"unknown distance {kind!r}")


def consistency_loss(params: ModelParams, x: np.ndarray, x_augs: np.ndarray,
                     spec: LossSpec) -> float:
    """Mean distance between the clean prediction and predictions on each
    augmented copy of x."""
    x_augs = np.asarray(x_augs, dtype=float)
    if len(x_augs) == 0:
        raise ValueError("consistency loss needs at least one augmentation")
    clean = forward(params, x).probs
    aug_probs = predict_probs(params, x_augs)
    vals = [probability_distance(clean, p, spec.distance) for p in aug_probs]
    return float(np.mean(vals))


def _supervised_value_and_logit_grad(params: ModelParams, X: np.ndarray, y: np.ndarray):
    n = len(X)
    Z1, H, _, P = _forward_full(params, X)
    py = P[np.arange(n), y]
    value = float(-np.log(np.maximum(py, PROB_FLOOR)).mean())
    G2 = P - _one_hot(y, params.n_classes)
    # rows whose true-class probability hit the clamp contribute a constant
    G2[py <= PROB_FLOOR] = 0.0
    G2 /= n
    return value, G2, Z1, H


def _consistency_value_and_logit_grad(params: ModelParams, targets: np.ndarray,
                                      augs: np.ndarray, spec: LossSpec):
    n_u, m, d = augs.shape
    A = augs.reshape(n_u * m, d)
    Z1, H, _, P = _forward_full(params, A)
    Q = np.repeat(targets, m, axis=0)
    if spec.distance == "squared_l2":
        per = ((Q - P) ** 2).sum(axis=1)
        V = 2.0 * (P - Q)
    else:
        Qc = np.maximum(Q, PROB_FLOOR)
        per = (Qc * (np.log(Qc) - np.log(np.maximum(P, PROB_FLOOR)))).sum(axis=1)
        V = np.where(P > PROB_FLOOR, -Qc / np.maximum(P, PROB_FLOOR), 0.0)
    value = float(per.mean())
    G2 = (P * (V - (V * P).sum(axis=1, keepdims=True))) / (n_u * m)
    return value, G2, Z1, H, A


def _backprop_from_logits(params: ModelParams, G2: np.ndarray, Z1: np.ndarray,
                          H: np.ndarray, X: np.ndarray) -> Gradients:
    dW2 = G2.T @ H
    db2 = G2.sum(axis=0)
    GH = G2 @ params.W2
    G1 = GH * _activate_grad(Z1, H, params.activation)
    dW1 = G1.T @ X
    db1 = G1.sum(axis=0)
    return Gradients(dW1, db1, dW2, db2)


def consistency_targets(params: ModelParams, unlabeled_X: np.ndarray) -> np.ndarray:
    """Clean-sample predictions used as constant targets by the consistency
    term (no gradient flows through them)."""
    return predict_probs(params, unlabeled_X)


def composite_loss(params: ModelParams, labeled_X: np.ndarray, labeled_y: np.ndarray,
                   aug_X: np.ndarray | None, targets: np.ndarray | None,
                   spec: LossSpec) -> float:
    """Value of the training objective with explicit (frozen) consistency
    targets. This is the function the gradient is exact for; finite
    differencing it must hold `targets` fixed."""
    labeled_X = np.asarray(labeled_X, dtype=float)
    labeled_y = np.asarray(labeled_y, dtype=int)
    value, _, _, _ = _supervised_value_and_logit_grad(params, labeled_X, labeled_y)
    if spec.unsup_weight > 0 and aug_X is not None and aug_X.size > 0:
        unsup, _, _, _, _ = _consistency_value_and_logit_grad(
            params, np.asarray(targets, dtype=float), np.asarray(aug_X, dtype=float), spec)
        value += spec.unsup_weight * unsup
    return value


def total_loss_and_grad(params: ModelParams, labeled_X: np.ndarray, labeled_y: np.ndarray,
                        unlabeled_X: np.ndarray | None, aug_X: np.ndarray | None,
                        spec: LossSpec) -> tuple[float, Gradients]:
    """Training objective and its exact gradient.

    `aug_X` has shape (n_unlabeled, n_train_augs, input_dim); the clean
    predictions on `unlabeled_X` act as constant targets, so the gradient
    flows only through the augmented branches. With unsup_weight 0 or an
    empty unlabeled batch this reduces exactly to the supervised loss.
    """
    labeled_X = np.asarray(labeled_X, dtype=float)
    labeled_y = np.asarray(labeled_y, dtype=int)
    if len(labeled_X) == 0:
        raise ValueError("labeled batch must be nonempty")
    value, G2, Z1, H = _supervised_value_and_logit_grad(params, labeled_X, labeled_y)
    grad = _backprop_from_logits(params, G2, Z1, H, labeled_X)
    if spec.unsup_weight > 0 and unlabeled_X is not None and len(unlabeled_X) > 0:
        targets = consistency_targets(params, unlabeled_X)
        aug_X = np.asarray(aug_X, dtype=float)
        unsup, G2a, Z1a, Ha, A = _consistency_value_and_logit_grad(params, targets, aug_X, spec)
        value += spec.unsup_weight * unsup
        grad = grad + _backprop_from_logits(params, G2a, Z1a, Ha, A).scaled(spec.unsup_weight)
    return value, grad


def sgd_step(params: ModelParams, grad: Gradients, lr: float, momentum: float = 0.0,
             velocity: Gradients | None = None) -> tuple[ModelParams, Gradients]:
    """One momentum-SGD update: v <- momentum * v + g; p <- p - lr * v."""
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    if not 0.0 <= momentum < 1.0:
        raise ValueError("momentum must lie in [0, 1)")
    if not grad.all_finite():
        raise FloatingPointError("non-finite gradient; training diverged")
    if velocity is None:
        velocity = zero_grads(params)
    v = Gradients(momentum * velocity.W1 + grad.W1, momentum * velocity.b1 + grad.b1,
                  momentum * velocity.W2 + grad.W2, momentum * velocity.b2 + grad.b2)
    new = ModelParams(params.W1 - lr * v.W1, params.b1 - lr * v.b1,
                      params.W2 - lr * v.W2, params.b2 - lr * v.b2, params.activation)
    return new, v
