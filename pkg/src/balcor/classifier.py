"""Linear classification head, weighted cross-entropy, and the trainer.

The head maps an encoder embedding to class probabilities via softmax
over an affine transform. Training minimizes class-weighted
cross-entropy: for binary tasks the positive-class term is multiplied
by ``lambda_weight``, which reduces to the classic weighted
binary cross-entropy

    loss = -mean(lambda * y * log(p) + (1 - y) * log(1 - p))

Optimization is mini-batch adaptive moment estimation with decoupled
weight decay, single-threaded and bit-deterministic per seed.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .corpus import Dataset, TaskSpec
from .encoders import EncoderBackend, encode_batch, encoder_from_config
from .errors import (
    DimensionMismatch,
    DivergedLoss,
    EmptyDataset,
    LengthMismatch,
)

PROB_EPS = 1e-7  # clamp for log() away from p in {0, 1}
CHECKPOINT_VERSION = 1


@dataclass
class ClassifierHead:
    """K x d weights plus length-K bias; row k scores class index k."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise DimensionMismatch(
                f"weights {self.weights.shape} incompatible with bias {self.bias.shape}"
            )
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise DivergedLoss("non-finite head parameters")

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "ClassifierHead":
        return ClassifierHead(self.weights.copy(), self.bias.copy())


@dataclass(frozen=True)
class TrainConfig:
    lambda_weight: float = 0.1
    learning_rate: float = 2e-5
    batch_size: int = 8
    weight_decay: float = 0.01
    epochs: int = 6
    warmup_steps: int = 0
    seed: int = 7
    # multi-class weighting is available but off unless asked for
    weight_multiclass: bool = False

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.lambda_weight <= 0:
            raise ValueError("lambda_weight must be > 0")


# hyperparameter profiles that worked well on social-media corpora;
# "reference" suits the bundled hashing encoder (a linear head needs a
# far larger step size than a fine-tuned transformer)
PRESETS = {
    "base": TrainConfig(),
    "large": TrainConfig(batch_size=16, weight_decay=0.005),
    "reference": TrainConfig(learning_rate=0.05, weight_decay=0.001),
}


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_proba(head: ClassifierHead, e: np.ndarray) -> np.ndarray:
    """Probability simplex over class indices for one embedding."""
    e = np.asarray(e, dtype=float)
    if e.shape != (head.dim,):
        raise DimensionMismatch(f"embedding shape {e.shape}, head expects ({head.dim},)")
    return _softmax(head.weights @ e + head.bias)


def predict_proba_batch(head: ClassifierHead, E: np.ndarray) -> np.ndarray:
    E = np.asarray(E, dtype=float)
    if E.ndim != 2 or E.shape[1] != head.dim:
        raise DimensionMismatch(f"batch shape {E.shape}, head expects (*, {head.dim})")
    return _softmax(E @ head.weights.T + head.bias)


def predict(head: ClassifierHead, e: np.ndarray) -> int:
    """Class index with maximal probability; ties go to the lowest index."""
    return int(np.argmax(predict_proba(head, e)))


def weighted_loss(y_true, y_prob, lambda_weight: float = 1.0,
                  weight_index: int = 1,
                  class_weights: Optional[Sequence[float]] = None) -> float:
    """Mean class-weighted cross-entropy.

    Two input shapes are accepted:

    * ``y_prob`` 1-D: probability of the positive class, ``y_true`` in
      {0, 1}; ``lambda_weight`` multiplies the positive term only.
    * ``y_prob`` 2-D (n, K): per-class probabilities, ``y_true`` holds
      column indices; the weight vector defaults to 1 everywhere except
      ``lambda_weight`` at ``weight_index``. ``class_weights`` overrides
      the whole vector.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before the log.
    """
    y_true = np.asarray(y_true)
    y_prob = np.asarray(y_prob, dtype=float)
    if y_true.shape[0] != y_prob.shape[0]:
        raise LengthMismatch(
            f"{y_true.shape[0]} labels vs {y_prob.shape[0]} probability rows")
    p = np.clip(y_prob, PROB_EPS, 1.0 - PROB_EPS)
    if y_prob.ndim == 1:
        y = y_true.astype(float)
        terms = lambda_weight * y * np.log(p) + (1.0 - y) * np.log(1.0 - p)
        return float(-terms.mean())
    if y_prob.ndim != 2:
        raise LengthMismatch(f"y_prob must be 1-D or 2-D, got shape {y_prob.shape}")
    k = y_prob.shape[1]
    if class_weights is not None:
        w = np.asarray(class_weights, dtype=float)
        if w.shape != (k,):
            raise LengthMismatch(f"class_weights shape {w.shape}, expected ({k},)")
    else:
        w = np.ones(k)
        w[weight_index] = lambda_weight
    idx = np.arange(len(y_true))
    return float(-(w[y_true] * np.log(p[idx, y_true])).mean())


def loss_and_grad(head: ClassifierHead, E: np.ndarray, y_idx: np.ndarray,
                  class_weights: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Weighted cross-entropy plus its analytic gradient in head parameters."""
    n = E.shape[0]
    probs = predict_proba_batch(head, E)
    p = np.clip(probs, PROB_EPS, 1.0 - PROB_EPS)
    idx = np.arange(n)
    loss = float(-(class_weights[y_idx] * np.log(p[idx, y_idx])).mean())
    delta = probs.copy()
    delta[idx, y_idx] -= 1.0
    delta *= class_weights[y_idx][:, None] / n
    return loss, delta.T @ E, delta.sum(axis=0)


def init_head(n_classes: int, dim: int, seed: int) -> ClassifierHead:
    rng = np.random.default_rng(seed)
    return ClassifierHead(rng.normal(0.0, 0.01, size=(n_classes, dim)), np.zeros(n_classes))


@dataclass
class FitResult:
    head: ClassifierHead
    epoch_losses: list[float]
    backend: EncoderBackend


def class_weight_vector(task: TaskSpec, config: TrainConfig) -> np.ndarray:
    """Per-class-index weights for the training loss.

    Binary tasks always weight the report label by lambda; multi-class
    tasks train unweighted unless ``weight_multiclass`` is set.
    """
    w = np.ones(task.n_classes)
    if task.n_classes == 2 or config.weight_multiclass:
        w[task.label_index(task.report_label)] = config.lambda_weight
    return w


def fit(backend: EncoderBackend, train: Dataset, config: TrainConfig,
        embeddings: Optional[np.ndarray] = None) -> FitResult:
    """Train a head on the (frozen) backend's embeddings.

    Deterministic per seed: iteration order, initialization, and
    optimizer state all derive from ``config.seed``. Per-epoch mean
    losses are recorded in the result. Backends are returned unchanged;
    trainable encoders would be fine-tuned here, but the bundled
    hashing encoder has no parameters.
    """
    if len(train) == 0:
        raise EmptyDataset("cannot fit on an empty dataset")
    task = train.task
    y = np.array([task.label_index(ex.label) for ex in train], dtype=np.int64)
    E = encode_batch(backend, [ex.text for ex in train]) if embeddings is None else embeddings
    if E.shape != (len(train), backend.dim()):
        raise DimensionMismatch(f"embedding matrix shape {E.shape}")

    head = init_head(task.n_classes, backend.dim(), config.seed)
    weights = class_weight_vector(task, config)

    m_w = np.zeros_like(head.weights); v_w = np.zeros_like(head.weights)
    m_b = np.zeros_like(head.bias); v_b = np.zeros_like(head.bias)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    n = len(train)
    epoch_losses: list[float] = []

    for epoch in range(config.epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            loss, d_w, d_b = loss_and_grad(head, E[batch], y[batch], weights)
            if not np.isfinite(loss):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}, step {step}")
            total += loss * len(batch)
            step += 1
            lr = config.learning_rate
            if config.warmup_steps > 0 and step <= config.warmup_steps:
                lr *= step / config.warmup_steps
            for grad, param, m, v in ((d_w, head.weights, m_w, v_w),
                                      (d_b, head.bias, m_b, v_b)):
                m *= beta1; m += (1 - beta1) * grad
                v *= beta2; v += (1 - beta2) * grad * grad
                m_hat = m / (1 - beta1 ** step)
                v_hat = v / (1 - beta2 ** step)
                param -= lr * (m_hat / (np.sqrt(v_hat) + eps) + config.weight_decay * param)
        epoch_losses.append(total / n)

    return FitResult(head=head, epoch_losses=epoch_losses, backend=backend)


def predict_dataset(backend: EncoderBackend, head: ClassifierHead,
                    dataset: Dataset) -> tuple[list[str], np.ndarray, np.ndarray]:
    """ids, predicted labels (task label values), and probability rows."""
    E = encode_batch(backend, [ex.text for ex in dataset])
    probs = predict_proba_batch(head, E) if len(dataset) else np.zeros((0, head.n_classes))
    idx = probs.argmax(axis=1) if len(dataset) else np.array([], dtype=int)
    labels = np.array([dataset.task.labels[i] for i in idx], dtype=np.int64)
    return [ex.id for ex in dataset], labels, probs


def save_model(path, backend: EncoderBackend, head: ClassifierHead,
               task: TaskSpec, config: TrainConfig) -> None:
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "encoder": backend.config(),
        "head": {"weights": head.weights.tolist(), "bias": head.bias.tolist()},
        "task": task.to_dict(),
        "train_config": asdict(config),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> tuple[EncoderBackend, ClassifierHead, TaskSpec, TrainConfig]:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')}")
    backend = encoder_from_config(payload["encoder"])
    head = ClassifierHead(np.array(payload["head"]["weights"]),
                          np.array(payload["head"]["bias"]))
    task = TaskSpec.from_dict(payload["task"])
    config = TrainConfig(**payload["train_config"])
    return backend, head, task, config


def write_predictions(path, ids: Sequence[str], labels: Sequence[int],
                      probas: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, rid in enumerate(ids):
            rec = {"id": rid, "pred": int(labels[i]),
                   "proba": [float(p) for p in probas[i]]}
            fh.write(json.dumps(rec) + "\n")


def read_predictions(path) -> dict[str, int]:
    """id -> predicted label; accepts ``pred`` or ``final`` keys."""
    preds: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            key = "pred" if "pred" in rec else "final"
            preds[str(rec["id"])] = int(rec[key])
    return preds
