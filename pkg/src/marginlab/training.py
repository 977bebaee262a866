"""Small bias-free MLP, deterministic SGD harness, and synthetic blob data.

The MLP stands in for a large feature extractor at desk scale: a stack of
weight matrices with relu between them (never after the last, so features
come out raw). Because there are no biases the network is positively
homogeneous, which keeps the normalized losses invariant to rescaling the
inputs. Every run is reproducible bit for bit from (model seed, data spec,
train config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (ConfigError, DegenerateVectorError, DomainError,
                     MarginlabError, ShapeError, TrainingDivergedError)
from .losses import (ClassWeights, LossKind, LossSpec,
                     cross_entropy_from_logits, margin_logits)
from .tensor import Graph, as_matrix

MODEL_MAGIC = "marginlab-model"
MODEL_VERSION = 1

CONVERGED_WINDOW = 5
CONVERGED_RATIO = 0.25    # final-window mean loss must undercut this share
CONVERGED_FLOOR = 0.5     # ... of the first window's, or simply end this low


@dataclass
class MlpModel:
    """Feature extractor (list of weight matrices) plus class weights."""

    layers: list[np.ndarray]
    class_weights: ClassWeights
    activation: str = "relu"

    def __post_init__(self):
        if self.activation != "relu":
            raise ConfigError(f"unsupported activation {self.activation!r}")
        self.layers = [as_matrix(w) for w in self.layers]
        if not self.layers:
            raise ConfigError("model needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.shape[1] != b.shape[0]:
                raise ShapeError(
                    f"consecutive layers {a.shape} -> {b.shape} incompatible")
        if self.layers[-1].shape[1] != self.class_weights.feature_dim:
            raise ShapeError(
                f"feature dim {self.layers[-1].shape[1]} != class weight rows "
                f"{self.class_weights.feature_dim}")

    @property
    def input_dim(self) -> int:
        return self.layers[0].shape[0]

    @property
    def feature_dim(self) -> int:
        return self.layers[-1].shape[1]

    @property
    def num_classes(self) -> int:
        return self.class_weights.num_classes

    def copy(self) -> "MlpModel":
        return MlpModel([w.copy() for w in self.layers],
                        ClassWeights(self.class_weights.matrix.copy()),
                        self.activation)

    @classmethod
    def init(cls, input_dim: int, hidden: tuple[int, ...], feature_dim: int,
             num_classes: int, seed: int) -> "MlpModel":
        """Fan-in scaled uniform layers; class weights as random unit
        directions."""
        rng = np.random.default_rng(seed)
        dims = (input_dim, *hidden, feature_dim)
        layers = []
        for fan_in, fan_out in zip(dims, dims[1:]):
            bound = np.sqrt(6.0 / fan_in)
            layers.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        w = rng.normal(size=(feature_dim, num_classes))
        w /= np.linalg.norm(w, axis=0)
        return cls(layers, ClassWeights(w))


@dataclass(frozen=True)
class TrainConfig:
    spec: LossSpec
    epochs: int = 60
    batch_size: int = 64
    learning_rate: float = 0.1
    lr_drop_epochs: tuple[int, ...] = (40, 50)   # lr *= 0.1 entering these
    weight_decay: float = 5e-4
    seed: int = 0
    normalize_features: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be > 0")
        if self.weight_decay < 0.0:
            raise ConfigError("weight_decay must be >= 0")


@dataclass
class SyntheticDataset:
    samples: np.ndarray   # N x input_dim
    labels: np.ndarray    # N
    num_classes: int


@dataclass
class TrainRun:
    model: MlpModel
    losses: np.ndarray      # per-epoch mean loss
    accuracies: np.ndarray  # per-epoch train accuracy
    converged: bool


def generate_blobs(classes: int, per_class: int, input_dim: int,
                   dispersion: float, seed: int) -> SyntheticDataset:
    """Gaussian clusters around centers spread on a circle of radius 4 in
    the first two input dimensions; deterministic per seed."""
    if classes < 2:
        raise ConfigError("need at least 2 classes")
    if per_class < 1:
        raise ConfigError("need at least 1 sample per class")
    if input_dim < 2:
        raise ConfigError("input_dim must be >= 2")
    if dispersion <= 0.0:
        raise ConfigError("dispersion must be > 0")
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(classes) / classes
    centers = np.zeros((classes, input_dim))
    centers[:, 0] = 4.0 * np.cos(angles)
    centers[:, 1] = 4.0 * np.sin(angles)
    samples = np.repeat(centers, per_class, axis=0)
    samples = samples + dispersion * rng.normal(size=samples.shape)
    labels = np.repeat(np.arange(classes), per_class)
    return SyntheticDataset(samples, labels.astype(np.int64), classes)


def extract_features(model: MlpModel, inputs) -> np.ndarray:
    """Forward pass up to (not including) the class-weight layer; no
    normalization applied."""
    h = as_matrix(inputs)
    if h.shape[1] != model.input_dim:
        raise ShapeError(
            f"input dim {h.shape[1]} != model input dim {model.input_dim}")
    last = len(model.layers) - 1
    for i, w in enumerate(model.layers):
        h = h @ w
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def predict_labels(model: MlpModel, inputs, variant: LossKind) -> np.ndarray:
    """Class decisions: raw-logit argmax for softmax, cosine argmax for the
    normalized variants."""
    feats = extract_features(model, inputs)
    w = model.class_weights.matrix
    if variant != LossKind.SOFTMAX:
        w = w / np.linalg.norm(w, axis=0)
    return np.argmax(feats @ w, axis=1)


def _training_step(params: list[np.ndarray], x: np.ndarray,
                   labels: np.ndarray, cfg: TrainConfig, lr: float) -> float:
    """One SGD step on a fresh graph; mutates params in place."""
    g = Graph()
    leaves = [g.leaf(p) for p in params]
    h = g.leaf(x)
    for i, wid in enumerate(leaves[:-1]):
        h = g.matmul(h, wid)
        if i < len(leaves) - 2:
            h = g.relu(h)
    logits = margin_logits(g, h, leaves[-1], labels, cfg.spec,
                           normalize_features=cfg.normalize_features)
    root = cross_entropy_from_logits(g, logits, labels)
    loss = float(g.value(root)[0, 0])
    g.backward(root)
    for p, leaf in zip(params, leaves):
        p -= lr * (g.grad(leaf) + cfg.weight_decay * p)
    return loss


def train(model: MlpModel, data: SyntheticDataset,
          cfg: TrainConfig) -> TrainRun:
    """Mini-batch SGD with weight decay and step-decayed learning rate.

    The input model is left untouched. A non-finite loss (or a numerically
    degenerate step) aborts with TrainingDivergedError carrying the epoch.
    The run counts as converged when the mean loss over the final window
    of 5 epochs falls below 0.9x the first window's, or ends below 0.1.
    """
    if data.num_classes != model.num_classes:
        raise ShapeError(
            f"dataset has {data.num_classes} classes, model "
            f"{model.num_classes}")
    work = model.copy()
    params = work.layers + [work.class_weights.matrix]
    rng = np.random.default_rng(cfg.seed)
    n = data.samples.shape[0]
    lr = cfg.learning_rate
    losses = np.zeros(cfg.epochs)
    accuracies = np.zeros(cfg.epochs)
    for epoch in range(cfg.epochs):
        if epoch in cfg.lr_drop_epochs:
            lr *= 0.1
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            try:
                loss = _training_step(params, data.samples[idx],
                                      data.labels[idx], cfg, lr)
            except (DomainError, DegenerateVectorError) as exc:
                raise TrainingDivergedError(
                    f"epoch {epoch}: {exc}", epoch) from exc
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"epoch {epoch}: non-finite loss", epoch)
            loss_sum += loss * idx.size
        losses[epoch] = loss_sum / n
        predicted = predict_labels(work, data.samples, cfg.spec.variant)
        accuracies[epoch] = float(np.mean(predicted == data.labels))
    window = min(CONVERGED_WINDOW, cfg.epochs)
    head = float(losses[:window].mean())
    tail = float(losses[-window:].mean())
    converged = tail < CONVERGED_RATIO * head or tail < CONVERGED_FLOOR
    return TrainRun(work, losses, accuracies, converged)


@dataclass
class AngularStats:
    """Per-class angular dispersion of normalized features.

    intra_spread[c] is the mean angle between class-c features and their
    class weight direction; inter_gap[c] the smallest angle between a
    class-c feature and any feature of another class.
    """

    intra_spread: np.ndarray
    inter_gap: np.ndarray

    @property
    def min_inter_gap(self) -> float:
        return float(self.inter_gap.min())


def angular_stats(features, labels, weights: ClassWeights) -> AngularStats:
    feats = as_matrix(features)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    if np.any(norms <= 1e-12):
        raise DegenerateVectorError("zero-norm feature row")
    unit = feats / norms
    w = weights.matrix / np.linalg.norm(weights.matrix, axis=0)
    c = weights.num_classes
    angles_to_w = np.arccos(np.clip(unit @ w, -1.0, 1.0))
    cross = np.arccos(np.clip(unit @ unit.T, -1.0, 1.0))
    intra = np.zeros(c)
    inter = np.zeros(c)
    for cls in range(c):
        mine = labels == cls
        if not mine.any():
            raise DomainError(f"class {cls} has no samples")
        intra[cls] = float(angles_to_w[mine, cls].mean())
        others = ~mine
        inter[cls] = float(cross[np.ix_(mine, others)].min()) \
            if others.any() else np.pi
    return AngularStats(intra, inter)


# ---------------------------------------------------------------------------
# model serialization (versioned JSON: magic, shape headers, row-major data)


def _matrix_payload(w: np.ndarray) -> dict:
    return {"rows": w.shape[0], "cols": w.shape[1],
            "data": [float(v) for v in w.ravel()]}


def _matrix_from_payload(payload: dict) -> np.ndarray:
    data = np.array(payload["data"], dtype=np.float64)
    return data.reshape(payload["rows"], payload["cols"])


def save_model(model: MlpModel, path) -> None:
    doc = {
        "format": MODEL_MAGIC,
        "version": MODEL_VERSION,
        "activation": model.activation,
        "layers": [_matrix_payload(w) for w in model.layers],
        "class_weights": _matrix_payload(model.class_weights.matrix),
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def load_model(path) -> MlpModel:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != MODEL_MAGIC:
        raise MarginlabError(f"{path}: not a {MODEL_MAGIC} file")
    if doc.get("version") != MODEL_VERSION:
        raise MarginlabError(f"{path}: unsupported version {doc.get('version')}")
    return MlpModel([_matrix_from_payload(p) for p in doc["layers"]],
                    ClassWeights(_matrix_from_payload(doc["class_weights"])),
                    doc["activation"])
