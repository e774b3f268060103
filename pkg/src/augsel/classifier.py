"""Multinomial logistic regression on embeddings, trained by full-batch GD.

Stands in for the image CNN: all the active loop needs from a classifier is
a class posterior per sample that can be refreshed every iteration.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from augsel.embedio import EmbeddingSet, LabelVector, check_aligned
from augsel.errors import CorruptionError, DomainError, FormatError, NumericError

MODEL_MAGIC = b"AMDL"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sHII")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    epochs: int = 300
    l2: float = 1e-3
    seed: int = 0  # unused by zero-init GD; kept so configs echo a full seed set

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DomainError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise DomainError(f"epochs must be >= 1, got {self.epochs}")
        if self.l2 < 0:
            raise DomainError(f"l2 must be non-negative, got {self.l2}")


@dataclass
class SoftmaxModel:
    weights: np.ndarray  # (K, d)
    bias: np.ndarray  # (K,)

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, class_count: int, dim: int) -> SoftmaxModel:
        return cls(np.zeros((class_count, dim)), np.zeros(class_count))

    def copy(self) -> SoftmaxModel:
        return SoftmaxModel(self.weights.copy(), self.bias.copy())


def _features(model: SoftmaxModel, x) -> np.ndarray:
    values = x.values if isinstance(x, EmbeddingSet) else np.asarray(x, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != model.dim:
        raise DomainError(f"model expects dim {model.dim}, got shape {values.shape}")
    return values


def logits(model: SoftmaxModel, x) -> np.ndarray:
    return _features(model, x) @ model.weights.T + model.bias


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict_proba(model: SoftmaxModel, x) -> np.ndarray:
    return softmax(logits(model, x))


def predict_labels(model: SoftmaxModel, x) -> LabelVector:
    # np.argmax returns the first maximum -> lowest class wins ties
    return LabelVector(np.argmax(predict_proba(model, x), axis=1), model.class_count)


def loss_and_gradient(model: SoftmaxModel, x, y, l2: float) -> tuple[float, SoftmaxModel]:
    """Mean cross-entropy plus ``l2/2 * |W|^2`` and its exact gradient.

    The gradient is returned as a SoftmaxModel of the same shape.
    """
    values = _features(model, x)
    labels = y.labels if isinstance(y, LabelVector) else np.asarray(y, dtype=np.int64)
    n = values.shape[0]
    if n == 0:
        raise DomainError("loss needs at least one sample")
    if labels.shape != (n,):
        raise DomainError(f"{n} samples but {labels.shape} labels")
    z = values @ model.weights.T + model.bias
    z = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = float(np.mean(log_norm - z[rows, labels]) + 0.5 * l2 * np.sum(model.weights**2))

    resid = np.exp(z - log_norm[:, None])
    resid[rows, labels] -= 1.0
    resid /= n
    grad_w = resid.T @ values + l2 * model.weights
    grad_b = resid.sum(axis=0)
    return loss, SoftmaxModel(grad_w, grad_b)


def train(
    x: EmbeddingSet, y: LabelVector, cfg: TrainConfig | None = None, *, history: list | None = None
) -> SoftmaxModel:
    """Fit from zero parameters; deterministic for a given config.

    If ``history`` is given, the loss before every step is appended to it.
    """
    cfg = cfg or TrainConfig()
    check_aligned(x, y, "train")
    if x.count == 0:
        raise DomainError("cannot train on an empty set")
    model = SoftmaxModel.zeros(y.class_count, x.dim)
    for epoch in range(cfg.epochs):
        loss, grad = loss_and_gradient(model, x, y, cfg.l2)
        if not np.isfinite(loss):
            raise NumericError(
                f"non-finite loss at epoch {epoch} (lr={cfg.learning_rate}, "
                f"|W|max={np.abs(model.weights).max():.3g})"
            )
        if history is not None:
            history.append(loss)
        model.weights -= cfg.learning_rate * grad.weights
        model.bias -= cfg.learning_rate * grad.bias
    if not (np.all(np.isfinite(model.weights)) and np.all(np.isfinite(model.bias))):
        raise NumericError("training diverged to non-finite parameters")
    return model


def save_model(model: SoftmaxModel, path) -> None:
    header = _MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, model.class_count, model.dim)
    body = np.concatenate([model.weights.reshape(-1), model.bias]).astype("<f8").tobytes()
    Path(path).write_bytes(header + body)


def load_model(path) -> SoftmaxModel:
    data = Path(path).read_bytes()
    if len(data) < _MODEL_HEADER.size:
        raise FormatError("model file too short")
    magic, version, k, d = _MODEL_HEADER.unpack_from(data, 0)
    if magic != MODEL_MAGIC or version != MODEL_VERSION:
        raise FormatError(f"not a model file (magic {magic!r}, version {version})")
    n = k * d + k
    if len(data) != _MODEL_HEADER.size + 8 * n:
        raise CorruptionError(f"model payload should hold {n} float64 values")
    flat = np.frombuffer(data, dtype="<f8", offset=_MODEL_HEADER.size).astype(np.float64)
    return SoftmaxModel(flat[: k * d].reshape(k, d).copy(), flat[k * d :].copy())
