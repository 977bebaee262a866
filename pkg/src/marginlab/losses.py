"""Softmax, normalized-softmax (NSL), and large-margin cosine (LMCL) losses.

All three reduce to a mean cross-entropy over per-class logits; they differ
only in how the logits are built from features x (N x K) and class weights
W (K x C):

  softmax:  f_j = W_j^T x                      (raw inner products, no bias)
  nsl:      f_j = s * cos(theta_j)             (unit rows of x, unit cols of W)
  lmcl:     f_j = s * (cos(theta_j) - m*[j=y]) (margin m on the target class)

Setting m = 0 makes lmcl identical to nsl by construction. Cross-entropy is
computed through a max-subtracted log-sum-exp so large scales (s up to 64
and beyond) stay in range.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ConfigError, ShapeError
from .tensor import DEFAULT_EPS, Graph, NodeId, as_matrix, one_hot


class LossKind(str, Enum):
    SOFTMAX = "softmax"
    NSL = "nsl"
    LMCL = "lmcl"


@dataclass(frozen=True)
class LossSpec:
    """Loss variant plus its fixed hyperparameters.

    s is the hypersphere radius applied to all normalized logits and m the
    cosine margin; both are constants, never trained.
    """

    variant: LossKind
    s: float = 1.0
    m: float = 0.0

    def __post_init__(self):
        if self.variant != LossKind.SOFTMAX and self.s <= 0.0:
            raise ConfigError(f"s must be positive, got {self.s}")
        if self.variant == LossKind.LMCL:
            if not 0.0 <= self.m < 1.0:
                raise ConfigError(f"m must lie in [0, 1), got {self.m}")
        elif self.m != 0.0:
            raise ConfigError(f"m must be 0 for {self.variant.value}, got {self.m}")

    @classmethod
    def softmax(cls) -> "LossSpec":
        return cls(LossKind.SOFTMAX)

    @classmethod
    def nsl(cls, s: float) -> "LossSpec":
        return cls(LossKind.NSL, s=s)

    @classmethod
    def lmcl(cls, s: float, m: float) -> "LossSpec":
        return cls(LossKind.LMCL, s=s, m=m)


@dataclass
class Batch:
    """Raw (pre-normalization) features with integer class labels."""

    features: np.ndarray  # N x K
    labels: np.ndarray    # N
    num_classes: int

    def __post_init__(self):
        self.features = as_matrix(self.features)
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.labels.size != self.features.shape[0]:
            raise ShapeError(
                f"{self.labels.size} labels for {self.features.shape[0]} rows")
        if self.labels.size < 1:
            raise ShapeError("batch must contain at least one sample")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ConfigError(
                f"labels must lie in [0, {self.num_classes})")


@dataclass
class ClassWeights:
    """Raw class-weight matrix, one column per class."""

    matrix: np.ndarray  # K x C

    def __post_init__(self):
        self.matrix = as_matrix(self.matrix)
        if np.any(np.linalg.norm(self.matrix, axis=0) <= DEFAULT_EPS):
            raise ConfigError("class weights contain a zero column")

    @property
    def feature_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[1]


def cross_entropy_from_logits(g: Graph, logits: NodeId, labels) -> NodeId:
    """Mean negative log posterior of the target classes, given logits."""
    n, c = g.value(logits).shape
    targets = one_hot(labels, c)
    if targets.shape[0] != n:
        raise ShapeError(f"{targets.shape[0]} labels for {n} logit rows")
    target_logit = g.row_sum(g.mul_const(logits, targets))
    per_sample = g.sub(g.row_logsumexp(logits), target_logit)
    return g.scale(g.sum_all(per_sample), 1.0 / n)


def unit_cosines(g: Graph, features: NodeId, weights: NodeId,
                 eps: float = DEFAULT_EPS) -> NodeId:
    """cos(theta_{j,i}) matrix from raw feature rows and weight columns."""
    x_hat = g.row_l2_normalize(features, eps)
    w_hat = g.transpose(g.row_l2_normalize(g.transpose(weights), eps))
    return g.matmul(x_hat, w_hat)


def margin_logits(g: Graph, features: NodeId, weights: NodeId, labels,
                  spec: LossSpec, *, normalize_features: bool = True,
                  eps: float = DEFAULT_EPS) -> NodeId:
    """Build the logit node for a loss spec from raw feature and weight
    nodes.

    With feature normalization off (the ablated scheme), weight columns
    stay unit but the feature norm replaces the fixed radius: logits are
    ||x|| cos(theta_j) with the margin scaled per sample by ||x||.
    """
    if spec.variant == LossKind.SOFTMAX:
        return g.matmul(features, weights)
    num_classes = g.value(weights).shape[1]
    targets = one_hot(labels, num_classes)
    if normalize_features:
        cos = unit_cosines(g, features, weights, eps)
        if spec.m != 0.0:
            cos = g.add_const(cos, -spec.m * targets)
        return g.scale(cos, spec.s)
    w_hat = g.transpose(g.row_l2_normalize(g.transpose(weights), eps))
    logits = g.matmul(features, w_hat)
    if spec.m != 0.0:
        shift = g.scale_rows_const(spec.m * targets, g.row_norm(features, eps))
        logits = g.sub(logits, shift)
    return logits


def _check_dims(batch: Batch, weights: ClassWeights) -> None:
    if batch.features.shape[1] != weights.feature_dim:
        raise ShapeError(
            f"feature dim {batch.features.shape[1]} != weight rows "
            f"{weights.feature_dim}")
    if batch.num_classes != weights.num_classes:
        raise ShapeError(
            f"batch has {batch.num_classes} classes, weights "
            f"{weights.num_classes} columns")


def _build_loss(g: Graph, spec: LossSpec, batch: Batch, weights: ClassWeights,
                normalize_features: bool = True) -> tuple[NodeId, NodeId, NodeId]:
    """Record the full loss graph; returns (root, feature leaf, weight leaf)."""
    _check_dims(batch, weights)
    x = g.leaf(batch.features)
    w = g.leaf(weights.matrix)
    logits = margin_logits(g, x, w, batch.labels, spec,
                           normalize_features=normalize_features)
    return cross_entropy_from_logits(g, logits, batch.labels), x, w


def softmax_loss(g: Graph, batch: Batch, weights: ClassWeights) -> NodeId:
    """Plain softmax cross-entropy over raw inner-product logits."""
    root, _, _ = _build_loss(g, LossSpec.softmax(), batch, weights)
    return root


def nsl_loss(g: Graph, batch: Batch, weights: ClassWeights,
             spec: LossSpec) -> NodeId:
    """Normalized softmax: cross-entropy over s-scaled cosines."""
    if spec.variant != LossKind.NSL:
        raise ConfigError(f"nsl_loss needs an NSL spec, got {spec.variant.value}")
    root, _, _ = _build_loss(g, spec, batch, weights)
    return root


def lmcl_loss(g: Graph, batch: Batch, weights: ClassWeights,
              spec: LossSpec) -> NodeId:
    """Large-margin cosine loss: margin m subtracted from the target-class
    cosine only, everything scaled by s."""
    if spec.variant != LossKind.LMCL:
        raise ConfigError(f"lmcl_loss needs an LMCL spec, got {spec.variant.value}")
    root, _, _ = _build_loss(g, spec, batch, weights)
    return root


def evaluate_loss(spec: LossSpec, batch: Batch, weights: ClassWeights,
                  normalize_features: bool = True) -> float:
    """Forward value of the configured loss on a batch."""
    g = Graph()
    root, _, _ = _build_loss(g, spec, batch, weights, normalize_features)
    return float(g.value(root)[0, 0])


def loss_gradients(spec: LossSpec, batch: Batch,
                   weights: ClassWeights) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the configured loss w.r.t. raw features and weights."""
    g = Graph()
    root, x, w = _build_loss(g, spec, batch, weights)
    g.backward(root)
    return g.grad(x), g.grad(w)
