"""One-hidden-layer ReLU/softmax classifier trained with plain minibatch SGD.

After every epoch the trainer records argmax predictions for the full training
and target sets, which become the two prediction traces.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .seeds import INIT, SHUFFLE, rng_for
from .traces import TraceMatrix, build_trace

log = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


class DivergenceError(ArithmeticError):
    """Non-finite values appeared in the model, its outputs or its gradients."""


@dataclass
class MlpModel:
    W1: np.ndarray  # (hidden, inputs)
    b1: np.ndarray
    W2: np.ndarray  # (classes, hidden)
    b2: np.ndarray

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.W1.shape[1], self.W1.shape[0], self.W2.shape[0]

    def params(self) -> List[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "MlpModel":
        return MlpModel(*(p.copy() for p in self.params()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.params())

    def __eq__(self, other) -> bool:
        if not isinstance(other, MlpModel):
            return NotImplemented
        return all(np.array_equal(p, q) for p, q in zip(self.params(), other.params()))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 128
    learning_rate: float = 0.1
    seed: int = 0
    snapshot_weights: bool = False

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValueError("learning_rate must be a positive finite number")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {"epochs", "batch_size", "learning_rate", "seed", "snapshot_weights"}
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        for key in ("epochs", "batch_size", "seed"):
            if key in d and (isinstance(d[key], bool) or not isinstance(d[key], int)):
                raise ValueError(f"{key} must be an integer")
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpochSnapshot:
    epoch: int  # 1-based
    train_predictions: np.ndarray
    target_predictions: np.ndarray
    weights: Optional[bytes] = None


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    test_accuracy: float


@dataclass
class TrainResult:
    model: MlpModel
    train_trace: TraceMatrix
    test_trace: TraceMatrix
    history: List[EpochMetrics]
    weight_snapshots: List[bytes] = field(default_factory=list)


def init_model(seed: int, dims: Tuple[int, int, int] = (4, 8, 7)) -> MlpModel:
    """Uniform fan-in scaled weights in ``±sqrt(6 / fan_in)``, zero biases."""
    n_in, n_hidden, n_out = dims
    rng = rng_for(seed, INIT)
    lim1 = math.sqrt(6.0 / n_in)
    lim2 = math.sqrt(6.0 / n_hidden)
    W1 = rng.uniform(-lim1, lim1, size=(n_hidden, n_in))
    W2 = rng.uniform(-lim2, lim2, size=(n_out, n_hidden))
    return MlpModel(W1, np.zeros(n_hidden), W2, np.zeros(n_out))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _affine(X: np.ndarray, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    # fixed summation order, so a row's result is independent of batch size
    out = b + X[..., 0, None] * W[:, 0]
    for i in range(1, W.shape[1]):
        out = out + X[..., i, None] * W[:, i]
    return out


def _hidden(model: MlpModel, X: np.ndarray):
    pre = _affine(X, model.W1, model.b1)
    return pre, np.maximum(pre, 0.0)


def _logits(model: MlpModel, h: np.ndarray) -> np.ndarray:
    return _affine(h, model.W2, model.b2)


def forward(model: MlpModel, features) -> np.ndarray:
    """Class probabilities for one feature vector or a ``(n, inputs)`` batch."""
    X = np.asarray(features, dtype=np.float64)
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    _, h = _hidden(model, X)
    logits = _logits(model, h)
    if not np.all(np.isfinite(logits)):
        raise DivergenceError("non-finite logits in forward pass")
    return softmax(logits)


def loss(probs, label: int) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= label < probs.shape[-1]:
        raise ValueError(f"label {label} out of range [0, {probs.shape[-1]})")
    return float(-math.log(max(float(probs[label]), PROB_FLOOR)))


def mean_loss(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    P = forward(model, X)
    p = np.maximum(P[np.arange(len(y)), y], PROB_FLOOR)
    return float(-np.log(p).mean())


def loss_and_gradients(model: MlpModel, X, y) -> Tuple[float, MlpModel]:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y))
    if len(y) == 0:
        raise ValueError("empty batch")
    rows = np.arange(len(y))
    pre, h = _hidden(model, X)
    P = softmax(_logits(model, h))
    batch_loss = float(-np.log(np.maximum(P[rows, y], PROB_FLOOR)).mean())
    G = P
    G[rows, y] -= 1.0
    G /= len(y)
    gW2 = G.T @ h
    gb2 = G.sum(axis=0)
    gpre = (G @ model.W2) * (pre > 0)
    gW1 = gpre.T @ X
    gb1 = gpre.sum(axis=0)
    grad = MlpModel(gW1, gb1, gW2, gb2)
    if not (math.isfinite(batch_loss) and grad.is_finite()):
        raise DivergenceError("non-finite loss or gradient")
    return batch_loss, grad


def gradients(model: MlpModel, X, y) -> MlpModel:
    """Analytic gradient of the mean cross-entropy over the batch ``(X, y)``.

    Returned as an :class:`MlpModel` holding gradients in place of parameters.
    """
    return loss_and_gradients(model, X, y)[1]


def argmax_label(probs) -> int:
    # np.argmax returns the first maximal index: ties go to the lowest class
    return int(np.argmax(np.asarray(probs)))


def predict(model: MlpModel, features):
    """Predicted label(s); ties resolve to the lowest class index."""
    P = forward(model, features)
    if P.ndim == 1:
        return argmax_label(P)
    return np.argmax(P, axis=1)


def weights_to_bytes(model: MlpModel) -> bytes:
    """Little-endian float64: W1 row-major, b1, W2 row-major, b2."""
    return b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in model.params())


def weights_from_bytes(data: bytes, dims: Tuple[int, int, int] = (4, 8, 7)) -> MlpModel:
    n_in, n_hidden, n_out = dims
    shapes = [(n_hidden, n_in), (n_hidden,), (n_out, n_hidden), (n_out,)]
    need = 8 * sum(int(np.prod(s)) for s in shapes)
    if len(data) != need:
        raise ValueError(f"weight blob has {len(data)} bytes, expected {need}")
    flat = np.frombuffer(data, dtype="<f8").astype(np.float64)
    out, off = [], 0
    for s in shapes:
        size = int(np.prod(s))
        out.append(flat[off:off + size].reshape(s).copy())
        off += size
    return MlpModel(*out)


def train(
    train_X: np.ndarray,
    train_y: np.ndarray,
    test_X: np.ndarray,
    test_y: Optional[np.ndarray],
    config: TrainConfig = TrainConfig(),
    n_classes: int = 7,
    on_epoch_end: Optional[Callable[[EpochSnapshot], None]] = None,
) -> TrainResult:
    """Train from scratch and return the final model plus per-epoch traces.

    ``test_y`` only feeds the per-epoch accuracy log and the trace's true-label
    column; it never influences the updates.
    """
    train_X = np.asarray(train_X, dtype=np.float64)
    test_X = np.asarray(test_X, dtype=np.float64)
    train_y = np.asarray(train_y, dtype=np.int64)
    if len(train_X) == 0 or len(test_X) == 0:
        raise ValueError("train and test sets must be non-empty")
    if len(train_X) != len(train_y):
        raise ValueError("train features and labels differ in length")
    if not (np.all(np.isfinite(train_X)) and np.all(np.isfinite(test_X))):
        raise ValueError("features must be finite")

    model = init_model(config.seed, (train_X.shape[1], 8, n_classes))
    shuffle_rng = rng_for(config.seed, SHUFFLE)
    n = len(train_X)
    lr = config.learning_rate
    train_cols, test_cols, history, blobs = [], [], [], []

    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(n)
        losses = []
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start:start + config.batch_size]
            Xb, yb = train_X[idx], train_y[idx]
            try:
                # non-finite values are detected and raised below
                with np.errstate(over="ignore", invalid="ignore"):
                    batch_loss, grad = loss_and_gradients(model, Xb, yb)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch}, batch {b}: {exc}") from exc
            for p, g in zip(model.params(), grad.params()):
                p -= lr * g
            if not model.is_finite():
                raise DivergenceError(f"epoch {epoch}, batch {b}: non-finite weights")
            losses.append(len(idx) * batch_loss)

        epoch_loss = float(np.sum(losses) / n)
        if not math.isfinite(epoch_loss):
            raise DivergenceError(f"epoch {epoch}: non-finite loss")
        train_pred = predict(model, train_X)
        test_pred = predict(model, test_X)
        train_cols.append(train_pred)
        test_cols.append(test_pred)
        test_acc = float(np.mean(test_pred == test_y)) if test_y is not None else float("nan")
        metrics = EpochMetrics(epoch, epoch_loss, float(np.mean(train_pred == train_y)), test_acc)
        history.append(metrics)
        log.info("epoch %d loss=%.4f train_acc=%.4f test_acc=%.4f", epoch,
                 metrics.train_loss, metrics.train_accuracy, metrics.test_accuracy)

        blob = weights_to_bytes(model) if config.snapshot_weights else None
        if blob is not None:
            blobs.append(blob)
        if on_epoch_end is not None:
            on_epoch_end(EpochSnapshot(epoch, train_pred.copy(), test_pred.copy(), blob))

    train_trace = build_trace(np.column_stack(train_cols), train_y, n_classes)
    test_trace = build_trace(
        np.column_stack(test_cols),
        None if test_y is None else np.asarray(test_y, dtype=np.int64),
        n_classes,
    )
    return TrainResult(model, train_trace, test_trace, history, blobs)

