"""Open/Closed eye-state classifiers.

Two interchangeable classifiers sit behind one small interface:

* HeuristicModel: a fixed variance rule. Closed lids are near-uniform, open
  eyes contain bright sclera against a dark iris/lid, so pixel variance
  separates the classes. Confidence is a logistic squash of the signed
  distance to the variance threshold.

* TinyNet: a two-layer network (5600 -> hidden -> 2, rectified-linear then
  softmax) trained from scratch with hand-written backpropagation and
  mini-batch gradient descent. Everything runs in float64; the backward
  pass is validated against central finite differences by gradient_check.

Model files are JSON with a format_version field; see save_model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .core import FRAME_PIXELS, EyeState, Frame
from .errors import DataError, ModelFormatError, ModelSchemaError, NumericError
from .synthetic import LabeledDataset

MODEL_FORMAT_VERSION = 1


class Classifier(Protocol):
    """classify returns the probability that the frame shows a Closed eye."""

    def classify(self, frame: Frame) -> float: ...
    def name(self) -> str: ...


def decide(confidence: float, threshold: float = 0.5) -> EyeState:
    """Closed iff confidence >= threshold (ties resolve Closed)."""
    if not 0.0 <= confidence <= 1.0:
        raise ValueError(f"confidence {confidence} outside [0, 1]")
    return EyeState.CLOSED if confidence >= threshold else EyeState.OPEN


def _logistic(z: float) -> float:
    # Split form avoids overflow in exp for large |z|.
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


# --- Variance heuristic ----------------------------------------------------

@dataclass(frozen=True)
class HeuristicModel:
    """Variance cutoff in squared 8-bit intensity units, plus logistic slope."""

    variance_threshold: float = 900.0
    slope: float = 0.01

    def __post_init__(self) -> None:
        if self.variance_threshold <= 0:
            raise ValueError("variance_threshold must be positive")
        if self.slope <= 0:
            raise ValueError("slope must be positive")


def heuristic_classify(frame: Frame, model: HeuristicModel) -> float:
    """Confidence of Closed: logistic(slope * (threshold - pixel variance))."""
    pixels = np.frombuffer(frame.pixels, dtype=np.uint8)
    variance = float(np.var(pixels.astype(np.float64)))
    return _logistic(model.slope * (model.variance_threshold - variance))


class HeuristicClassifier:
    def __init__(self, model: HeuristicModel | None = None):
        self.model = model or HeuristicModel()

    def classify(self, frame: Frame) -> float:
        return heuristic_classify(frame, self.model)

    def name(self) -> str:
        return "heuristic"


# --- Two-layer network -----------------------------------------------------

class TinyNet:
    """Immutable two-layer softmax classifier.

    Shapes: w1 (hidden, 5600), b1 (hidden,), w2 (2, hidden), b2 (2,).
    Class 0 is Open, class 1 is Closed. Arrays are float64 and marked
    read-only, so a model can be shared freely between threads.
    """

    def __init__(self, w1: np.ndarray, b1: np.ndarray,
                 w2: np.ndarray, b2: np.ndarray):
        w1 = np.ascontiguousarray(w1, dtype=np.float64)
        b1 = np.ascontiguousarray(b1, dtype=np.float64)
        w2 = np.ascontiguousarray(w2, dtype=np.float64)
        b2 = np.ascontiguousarray(b2, dtype=np.float64)
        hidden, input_dim = w1.shape
        if input_dim != FRAME_PIXELS:
            raise ValueError(f"w1 must have {FRAME_PIXELS} columns, got {input_dim}")
        if b1.shape != (hidden,) or w2.shape != (2, hidden) or b2.shape != (2,):
            raise ValueError(
                f"inconsistent shapes: w1 {w1.shape}, b1 {b1.shape}, "
                f"w2 {w2.shape}, b2 {b2.shape}"
            )
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            if not np.all(np.isfinite(arr)):
                raise NumericError(f"{name} contains non-finite values")
        for arr in (w1, b1, w2, b2):
            arr.flags.writeable = False
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]

    @classmethod
    def zeros(cls, hidden_dim: int = 16) -> "TinyNet":
        return cls(np.zeros((hidden_dim, FRAME_PIXELS)), np.zeros(hidden_dim),
                   np.zeros((2, hidden_dim)), np.zeros(2))

    @classmethod
    def init_random(cls, hidden_dim: int, rng: np.random.Generator) -> "TinyNet":
        """Gaussian init scaled by fan-in; biases start at zero."""
        if hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        w1 = rng.normal(0.0, 1.0 / math.sqrt(FRAME_PIXELS), (hidden_dim, FRAME_PIXELS))
        w2 = rng.normal(0.0, 1.0 / math.sqrt(hidden_dim), (2, hidden_dim))
        return cls(w1, np.zeros(hidden_dim), w2, np.zeros(2))


def frames_to_matrix(frames: Sequence[Frame] | LabeledDataset) -> np.ndarray:
    """Stack frame pixels into an (n, 5600) float64 matrix scaled to [0, 1]."""
    if isinstance(frames, LabeledDataset):
        return frames.pixels.astype(np.float64) / 255.0
    rows = [np.frombuffer(f.pixels, dtype=np.uint8) for f in frames]
    return np.stack(rows).astype(np.float64) / 255.0


def _forward(X: np.ndarray, w1, b1, w2, b2):
    """Returns (z1, h, logits, probs) for a batch X of scaled pixels."""
    z1 = X @ w1.T + b1
    h = np.maximum(z1, 0.0)
    logits = h @ w2.T + b2
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    probs = e / e.sum(axis=1, keepdims=True)
    return z1, h, logits, probs


def _loss_from_logits(logits: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy via log-sum-exp (no intermediate probabilities)."""
    m = logits.max(axis=1)
    lse = m + np.log(np.exp(logits - m[:, None]).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(len(y)), y]))


def _loss_and_grads(X: np.ndarray, y: np.ndarray, w1, b1, w2, b2):
    z1, h, logits, probs = _forward(X, w1, b1, w2, b2)
    n = X.shape[0]
    loss = _loss_from_logits(logits, y)
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    gw2 = dlogits.T @ h
    gb2 = dlogits.sum(axis=0)
    dh = dlogits @ w2
    dz1 = dh * (z1 > 0.0)
    gw1 = dz1.T @ X
    gb1 = dz1.sum(axis=0)
    return loss, gw1, gb1, gw2, gb2


def net_classify(frame: Frame, model: TinyNet) -> float:
    """Softmax probability of Closed for one frame."""
    X = np.frombuffer(frame.pixels, dtype=np.uint8).astype(np.float64) / 255.0
    _, _, _, probs = _forward(X[None, :], model.w1, model.b1, model.w2, model.b2)
    if not np.all(np.isfinite(probs)):
        raise NumericError(f"non-finite activation on frame {frame.index}")
    return float(probs[0, 1])


def net_classify_batch(X: np.ndarray, model: TinyNet) -> np.ndarray:
    """Vectorized confidences for an (n, 5600) scaled pixel matrix."""
    _, _, _, probs = _forward(X, model.w1, model.b1, model.w2, model.b2)
    if not np.all(np.isfinite(probs)):
        raise NumericError("non-finite activation in batch forward")
    return probs[:, 1]


class NetClassifier:
    def __init__(self, model: TinyNet):
        self.model = model

    def classify(self, frame: Frame) -> float:
        return net_classify(frame, self.model)

    def name(self) -> str:
        return "tinynet"


# --- Training --------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    epochs: int = 100
    learning_rate: float = 0.01
    seed: int = 0
    hidden_dim: int = 16
    early_stop_patience: int = 0  # 0 disables early stopping

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            # A zero rate is allowed: it makes training a measured no-op,
            # which is useful for calibration runs.
            raise ValueError("learning_rate must be >= 0")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")


@dataclass(frozen=True)
class TrainReport:
    """Per-epoch metrics; epoch indices are 1-based."""

    train_loss: tuple[float, ...]
    train_accuracy: tuple[float, ...]
    val_accuracy: tuple[float, ...]
    epoch_of_best: int
    final_val_accuracy: float

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {
            "train_loss": list(self.train_loss),
            "train_accuracy": list(self.train_accuracy),
            "val_accuracy": list(self.val_accuracy),
            "epoch_of_best": self.epoch_of_best,
            "final_val_accuracy": self.final_val_accuracy,
        }


def _accuracy(X: np.ndarray, y: np.ndarray, w1, b1, w2, b2) -> float:
    _, _, logits, _ = _forward(X, w1, b1, w2, b2)
    # argmax of logits equals argmax of softmax; ties (equal logits) fall to
    # class 0 under argmax, but decide()'s >= rule picks Closed, so compare
    # through the same confidence rule instead.
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    conf_closed = e[:, 1] / e.sum(axis=1)
    pred = (conf_closed >= 0.5).astype(np.int64)
    return float(np.mean(pred == y))


def train(dataset: LabeledDataset, config: TrainConfig,
          init: TinyNet | None = None,
          validation: LabeledDataset | None = None) -> tuple[TinyNet, TrainReport]:
    """Mini-batch gradient descent on mean cross-entropy.

    Deterministic for a given config: weight init and per-epoch shuffling
    are drawn from one RNG seeded with config.seed. Per-epoch metrics are
    computed on the full training set after each epoch; validation accuracy
    falls back to the training set when no validation split is given.
    """
    if len(dataset) == 0:
        raise DataError("training set is empty")
    classes = np.unique(dataset.labels)
    if len(classes) < 2:
        raise DataError(f"training set contains a single class ({classes.tolist()})")
    if config.batch_size > len(dataset):
        raise DataError(
            f"batch_size {config.batch_size} exceeds dataset size {len(dataset)}"
        )
    if init is not None and init.hidden_dim != config.hidden_dim:
        raise ValueError(
            f"init has hidden_dim {init.hidden_dim}, config says {config.hidden_dim}"
        )

    rng = np.random.default_rng(config.seed)
    start = init if init is not None else TinyNet.init_random(config.hidden_dim, rng)
    w1 = start.w1.copy()
    b1 = start.b1.copy()
    w2 = start.w2.copy()
    b2 = start.b2.copy()

    X = frames_to_matrix(dataset)
    y = dataset.labels.astype(np.int64)
    val = validation if validation is not None else dataset
    Xv = frames_to_matrix(val)
    yv = val.labels.astype(np.int64)

    n = len(dataset)
    lr = config.learning_rate
    train_loss: list[float] = []
    train_acc: list[float] = []
    val_acc: list[float] = []
    best_acc = -1.0
    best_epoch = 0
    stale = 0

    # Overflow shows up as a non-finite loss and is reported as NumericError,
    # so the interim fp warnings carry no extra information.
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n)
            for lo in range(0, n, config.batch_size):
                idx = order[lo:lo + config.batch_size]
                loss, gw1, gb1, gw2, gb2 = _loss_and_grads(X[idx], y[idx], w1, b1, w2, b2)
                if not math.isfinite(loss):
                    raise NumericError(f"training diverged at epoch {epoch}")
                w1 -= lr * gw1
                b1 -= lr * gb1
                w2 -= lr * gw2
                b2 -= lr * gb2

            _, _, logits, _ = _forward(X, w1, b1, w2, b2)
            epoch_loss = _loss_from_logits(logits, y)
            if not math.isfinite(epoch_loss):
                raise NumericError(f"training diverged at epoch {epoch}")
            train_loss.append(epoch_loss)
            train_acc.append(_accuracy(X, y, w1, b1, w2, b2))
            acc = _accuracy(Xv, yv, w1, b1, w2, b2)
            val_acc.append(acc)

            if acc > best_acc:
                best_acc = acc
                best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if config.early_stop_patience and stale >= config.early_stop_patience:
                    break

    report = TrainReport(
        train_loss=tuple(train_loss),
        train_accuracy=tuple(train_acc),
        val_accuracy=tuple(val_acc),
        epoch_of_best=best_epoch,
        final_val_accuracy=val_acc[-1],
    )
    return TinyNet(w1, b1, w2, b2), report


def init_from_model(source: TinyNet, target_hidden_dim: int, seed: int = 0) -> TinyNet:
    """Seed a new model from an existing one.

    Equal widths copy exactly; otherwise the overlapping leading hidden
    units are copied and any remainder is drawn fresh from the seeded RNG.
    """
    if target_hidden_dim < 1:
        raise ValueError("target_hidden_dim must be >= 1")
    if target_hidden_dim == source.hidden_dim:
        return TinyNet(source.w1, source.b1, source.w2, source.b2)
    rng = np.random.default_rng(seed)
    fresh = TinyNet.init_random(target_hidden_dim, rng)
    k = min(target_hidden_dim, source.hidden_dim)
    w1 = fresh.w1.copy()
    b1 = fresh.b1.copy()
    w2 = fresh.w2.copy()
    w1[:k] = source.w1[:k]
    b1[:k] = source.b1[:k]
    w2[:, :k] = source.w2[:, :k]
    return TinyNet(w1, b1, w2, source.b2)


# --- Gradient verification -------------------------------------------------

def perturbed_w1_losses(model: TinyNet, X: np.ndarray, y: np.ndarray,
                        row: int, eps: float) -> np.ndarray:
    """Loss after perturbing each w1[row, j] by eps, for all j at once.

    Only hidden unit `row` changes under such a perturbation, so the batch
    forward is recomputed incrementally: z1[:, row] shifts by eps * X[:, j],
    and the logits shift by w2[:, row] times the hidden-activation delta.
    Used by gradient_check; its agreement with a naive full forward is
    itself covered by a test.
    """
    z1, h, logits, _ = _forward(X, model.w1, model.b1, model.w2, model.b2)
    n, d = X.shape
    z1p = z1[:, row][:, None] + eps * X            # (n, d)
    delta_h = np.maximum(z1p, 0.0) - h[:, row][:, None]
    # logits_p[s, c, j] = logits[s, c] + w2[c, row] * delta_h[s, j]
    logits_p = logits[:, :, None] + model.w2[:, row][None, :, None] * delta_h[:, None, :]
    m = logits_p.max(axis=1)                       # (n, d)
    lse = m + np.log(np.exp(logits_p - m[:, None, :]).sum(axis=1))
    picked = logits_p[np.arange(n), y, :]          # (n, d)
    return (lse - picked).mean(axis=0)             # (d,)


def _loss_for_params(X, y, w1, b1, w2, b2) -> float:
    _, _, logits, _ = _forward(X, w1, b1, w2, b2)
    return _loss_from_logits(logits, y)


def gradient_check(model: TinyNet, batch: LabeledDataset,
                   epsilon: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    Every parameter is perturbed. The small parameter groups (b1, w2, b2)
    use plain recomputation; the w1 block uses the incremental forward of
    perturbed_w1_losses, which makes the full sweep tractable.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if len(batch) == 0:
        raise ValueError("batch is empty")
    X = frames_to_matrix(batch)
    y = batch.labels.astype(np.int64)
    _, gw1, gb1, gw2, gb2 = _loss_and_grads(X, y, model.w1, model.b1,
                                            model.w2, model.b2)

    def rel(analytic: np.ndarray, numeric: np.ndarray) -> float:
        denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-6)
        return float(np.max(np.abs(analytic - numeric) / denom))

    worst = 0.0
    for row in range(model.hidden_dim):
        plus = perturbed_w1_losses(model, X, y, row, epsilon)
        minus = perturbed_w1_losses(model, X, y, row, -epsilon)
        numeric = (plus - minus) / (2.0 * epsilon)
        worst = max(worst, rel(gw1[row], numeric))

    params = [("b1", model.b1, gb1), ("w2", model.w2, gw2), ("b2", model.b2, gb2)]
    for name, arr, analytic in params:
        numeric = np.empty_like(arr)
        for idx in np.ndindex(arr.shape):
            perturbed = arr.copy()
            kw = {"w1": model.w1, "b1": model.b1, "w2": model.w2, "b2": model.b2}
            perturbed[idx] = arr[idx] + epsilon
            kw[name] = perturbed
            up = _loss_for_params(X, y, **kw)
            perturbed[idx] = arr[idx] - epsilon
            down = _loss_for_params(X, y, **kw)
            numeric[idx] = (up - down) / (2.0 * epsilon)
        worst = max(worst, rel(analytic, numeric))
    return worst


# --- Persistence -----------------------------------------------------------

def save_model(model: TinyNet | HeuristicModel, path) -> None:
    """Write a model as a JSON document with a format_version marker."""
    if isinstance(model, TinyNet):
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "tinynet",
            "input_dim": model.input_dim,
            "hidden_dim": model.hidden_dim,
            "weights_1": model.w1.ravel().tolist(),
            "bias_1": model.b1.tolist(),
            "weights_2": model.w2.ravel().tolist(),
            "bias_2": model.b2.tolist(),
        }
    elif isinstance(model, HeuristicModel):
        doc = {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "heuristic",
            "variance_threshold": model.variance_threshold,
            "slope": model.slope,
        }
    else:
        raise TypeError(f"cannot save {type(model).__name__}")
    Path(path).write_text(json.dumps(doc))


def load_model(path) -> TinyNet | HeuristicModel:
    """Inverse of save_model; behavioral round-trip is exact.

    JSON serializes float64 via shortest round-trip decimal form, so loaded
    weights are bit-equal to the saved ones.
    """
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: invalid model file at byte {exc.pos}") from exc
    if not isinstance(doc, dict):
        raise ModelSchemaError(f"{path}: expected a top-level object")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelSchemaError(f"{path}: unsupported format_version {version!r}")
    kind = doc.get("kind")
    try:
        if kind == "heuristic":
            return HeuristicModel(variance_threshold=float(doc["variance_threshold"]),
                                  slope=float(doc["slope"]))
        if kind == "tinynet":
            input_dim = int(doc["input_dim"])
            hidden = int(doc["hidden_dim"])
            if input_dim != FRAME_PIXELS:
                raise ModelSchemaError(
                    f"{path}: input_dim {input_dim} != {FRAME_PIXELS}"
                )
            w1 = np.array(doc["weights_1"], dtype=np.float64)
            b1 = np.array(doc["bias_1"], dtype=np.float64)
            w2 = np.array(doc["weights_2"], dtype=np.float64)
            b2 = np.array(doc["bias_2"], dtype=np.float64)
            if w1.size != hidden * input_dim or b1.size != hidden or \
                    w2.size != 2 * hidden or b2.size != 2:
                raise ModelSchemaError(f"{path}: weight sizes do not match dims")
            return TinyNet(w1.reshape(hidden, input_dim), b1,
                           w2.reshape(2, hidden), b2)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ModelSchemaError):
            raise
        raise ModelSchemaError(f"{path}: bad or missing field: {exc}") from exc
    raise ModelSchemaError(f"{path}: unknown model kind {kind!r}")


def make_classifier(spec: str) -> Classifier:
    """Build a classifier from a CLI-style spec: 'heuristic' or 'tinynet:<file>'."""
    if spec == "heuristic":
        return HeuristicClassifier()
    if spec.startswith("tinynet:"):
        model = load_model(spec.split(":", 1)[1])
        if not isinstance(model, TinyNet):
            raise ModelSchemaError(f"{spec}: file does not hold a tinynet model")
        return NetClassifier(model)
    raise ValueError(f"unknown classifier spec {spec!r}; "
                     "use 'heuristic' or 'tinynet:<model-file>'")
