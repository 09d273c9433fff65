"""Model adaptation on frozen features.

Two head families trained with mini-batch AdamW on mean cross-entropy:

* LinearProbe: logits = W x + b, trained from zero init.
* PrototypeModel: logits = cos(x, p_k) / t with unit-norm class
  prototypes and a learnable temperature (initial 0.07). Prototype rows
  are re-normalized after every optimizer step; the temperature is
  optimized through log t so it stays positive no matter the update.

Training is bit-deterministic: one seeded generator drives the per-epoch
shuffles and every reduction has a fixed order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import l2_normalize
from .errors import (
    DivergenceError,
    InvalidInputError,
    InvalidLabelError,
    ShapeError,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
DEFAULT_TEMPERATURE = 0.07


@dataclass(frozen=True)
class LinearProbe:
    """Linear classification head: K x d weights plus bias."""

    W: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        W = np.asarray(self.W, dtype=np.float64)
        b = np.asarray(self.b, dtype=np.float64)
        if W.ndim != 2 or b.shape != (W.shape[0],):
            raise ShapeError(f"inconsistent probe shapes W{W.shape} b{b.shape}")
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise InvalidInputError("probe parameters must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    @classmethod
    def zeros(cls, num_classes: int, dim: int) -> "LinearProbe":
        return cls(np.zeros((num_classes, dim)), np.zeros(num_classes))

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]

    @property
    def dim(self) -> int:
        return self.W.shape[1]

    def logits(self, features: np.ndarray) -> np.ndarray:
        if features.shape[1] != self.dim:
            raise ShapeError(f"features have dim {features.shape[1]}, probe expects {self.dim}")
        return features @ self.W.T + self.b


@dataclass(frozen=True)
class PrototypeModel:
    """Cosine-similarity head: unit-norm prototypes scaled by 1/t."""

    P: np.ndarray
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        P = np.asarray(self.P, dtype=np.float64)
        if P.ndim != 2:
            raise ShapeError("prototypes must be a K x d matrix")
        norms = np.linalg.norm(P, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise InvalidInputError("prototype rows must be unit-norm")
        if not self.temperature > 0:
            raise InvalidInputError("temperature must be positive")
        object.__setattr__(self, "P", P)

    @classmethod
    def from_class_means(cls, features, labels, num_classes, temperature=DEFAULT_TEMPERATURE):
        """Initialize each prototype as the normalized mean of its class features."""
        features = np.asarray(features, dtype=np.float64)
        labels = np.asarray(labels, dtype=np.int64)
        P = np.empty((num_classes, features.shape[1]))
        for k in range(num_classes):
            rows = features[labels == k]
            if len(rows) == 0:
                raise InvalidInputError(f"class {k} has no examples to initialize a prototype")
            P[k] = rows.mean(axis=0)
        return cls(l2_normalize(P), temperature)

    @property
    def num_classes(self) -> int:
        return self.P.shape[0]

    @property
    def dim(self) -> int:
        return self.P.shape[1]

    def logits(self, features: np.ndarray) -> np.ndarray:
        if features.shape[1] != self.dim:
            raise ShapeError(
                f"features have dim {features.shape[1]}, prototypes expect {self.dim}"
            )
        return (features @ self.P.T) / self.temperature


@dataclass(frozen=True)
class TrainConfig:
    lr_head: float = 1e-4
    lr_temperature: float = 1e-4
    epochs: int = 50
    batch_size: int = 32
    weight_decay: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.lr_head <= 0 or self.lr_temperature <= 0:
            raise InvalidInputError("learning rates must be > 0")
        if self.epochs < 0:
            raise InvalidInputError("epochs must be >= 0")
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(model, features: np.ndarray) -> np.ndarray:
    """Row-stochastic class distribution for each feature row."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ShapeError("features must be 2-d")
    return softmax(model.logits(features))


def loss_and_grad(model, features, labels, sample_weight=None):
    """Mean cross-entropy and its gradient in model parameter space.

    Returns (loss, grads) where grads maps parameter name to array:
    {"W", "b"} for LinearProbe, {"P", "t"} for PrototypeModel with t
    treated as a free positive scalar. The decoupled weight decay used
    by training is not part of this loss.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(features) == 0:
        raise InvalidInputError("batch must be non-empty")
    if labels.shape != (len(features),):
        raise ShapeError("labels must have one entry per feature row")
    if labels.min() < 0 or labels.max() >= model.num_classes:
        raise InvalidLabelError(
            f"labels must lie in [0, {model.num_classes}), got range "
            f"[{labels.min()}, {labels.max()}]"
        )
    n = len(features)
    if sample_weight is None:
        weights = np.full(n, 1.0 / n)
    else:
        sample_weight = np.asarray(sample_weight, dtype=np.float64)
        total = np.cumsum(sample_weight)[-1]
        if total <= 0:
            raise InvalidInputError("sample weights must sum to > 0")
        weights = sample_weight / total

    logits = model.logits(features)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    loss = float(np.cumsum(-log_probs[np.arange(n), labels] * weights)[-1])

    probs = np.exp(log_probs)
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta *= weights[:, None]

    if isinstance(model, LinearProbe):
        return loss, {"W": delta.T @ features, "b": delta.sum(axis=0)}
    t = model.temperature
    grad_P = (delta.T @ features) / t
    grad_t = float(-np.cumsum((delta * logits).ravel())[-1] / t)
    return loss, {"P": grad_P, "t": grad_t}


class _AdamW:
    """Minimal decoupled-weight-decay Adam over named parameter arrays."""

    def __init__(self, shapes):
        self.m = {k: np.zeros(s) for k, s in shapes.items()}
        self.v = {k: np.zeros(s) for k, s in shapes.items()}
        self.step_count = 0

    def step(self, params, grads, lr, weight_decay):
        self.step_count += 1
        bc1 = 1.0 - ADAM_BETA1**self.step_count
        bc2 = 1.0 - ADAM_BETA2**self.step_count
        out = {}
        for name, p in params.items():
            g = grads[name]
            self.m[name] = ADAM_BETA1 * self.m[name] + (1.0 - ADAM_BETA1) * g
            self.v[name] = ADAM_BETA2 * self.v[name] + (1.0 - ADAM_BETA2) * g * g
            update = (self.m[name] / bc1) / (np.sqrt(self.v[name] / bc2) + ADAM_EPS)
            out[name] = p - lr[name] * update - lr[name] * weight_decay[name] * p
        return out


def train(model, features, labels, cfg: TrainConfig, sample_weight=None):
    """Run cfg.epochs of shuffled mini-batch AdamW and return the new model.

    Weight decay applies to the weight matrices (W, P); bias and
    temperature are exempt. Same inputs and seed give bit-identical
    parameters. epochs=0 returns the model unchanged.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(features) == 0:
        raise InvalidInputError("training set must be non-empty")
    if len(features) != len(labels):
        raise ShapeError("features and labels must have equal length")
    if sample_weight is not None:
        sample_weight = np.asarray(sample_weight, dtype=np.float64)
        if sample_weight.shape != (len(features),):
            raise ShapeError("sample_weight must have one entry per example")
    if cfg.epochs == 0:
        if isinstance(model, LinearProbe):
            return LinearProbe(model.W.copy(), model.b.copy())
        if isinstance(model, PrototypeModel):
            return PrototypeModel(model.P.copy(), model.temperature)
        raise InvalidInputError(f"unknown model type {type(model).__name__}")

    if isinstance(model, LinearProbe):
        params = {"W": model.W.copy(), "b": model.b.copy()}
        lr = {"W": cfg.lr_head, "b": cfg.lr_head}
        decay = {"W": cfg.weight_decay, "b": 0.0}
    elif isinstance(model, PrototypeModel):
        params = {"P": model.P.copy(), "log_t": np.array(np.log(model.temperature))}
        lr = {"P": cfg.lr_head, "log_t": cfg.lr_temperature}
        decay = {"P": cfg.weight_decay, "log_t": 0.0}
    else:
        raise InvalidInputError(f"unknown model type {type(model).__name__}")

    opt = _AdamW({k: v.shape for k, v in params.items()})
    rng = np.random.default_rng(cfg.seed)
    n = len(features)

    for _ in range(cfg.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            if isinstance(model, LinearProbe):
                current = LinearProbe(params["W"], params["b"])
            else:
                current = PrototypeModel(params["P"], float(np.exp(params["log_t"])))
            batch_w = None if sample_weight is None else sample_weight[idx]
            loss, grads = loss_and_grad(current, features[idx], labels[idx], batch_w)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite training loss {loss}")
            if isinstance(model, PrototypeModel):
                # chain rule through t = exp(log_t)
                grads = {"P": grads["P"], "log_t": grads["t"] * np.exp(params["log_t"])}
            params = opt.step(params, grads, lr, decay)
            if isinstance(model, PrototypeModel):
                params["P"] = l2_normalize(params["P"])

    if isinstance(model, LinearProbe):
        return LinearProbe(params["W"], params["b"])
    return PrototypeModel(params["P"], float(np.exp(params["log_t"])))
