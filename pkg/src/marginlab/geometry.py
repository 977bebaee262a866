"""Theoretical quantities of the large-margin cosine formulation.

Covers the lower bound of the scale s, the feasible scope of the cosine
margin m, equiangular (regular simplex) weight configurations that realize
the equality conditions, and labeled decision-region grids for the four
boundary rules (softmax / nsl / a-softmax / lmcl). Every closed-form
quantity has a brute-force or direct-evaluation companion so the formulas
can be verified independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .errors import ConfigError, DomainError, InfeasibleConfigurationError

UNIT_TOL = 1e-9


class BoundKind(str, Enum):
    EXACT = "exact"
    SOFT = "soft"   # only an order-of-magnitude ceiling is known


class MarginScope(NamedTuple):
    m_upper: float
    kind: BoundKind


@dataclass(frozen=True)
class OracleEvidence:
    """One independently computed check: a value, the bound it is held
    against, and whether it satisfies it."""

    description: str
    computed: float
    bound: float
    satisfied: bool

    def to_dict(self) -> dict:
        return {
            "description": self.description,
            "computed": self.computed,
            "bound": self.bound,
            "satisfied": self.satisfied,
        }


@dataclass
class WeightConfig:
    """Unit-column weight configuration (K x C)."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.array(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise DomainError("weight configuration must be a 2-D matrix")
        norms = np.linalg.norm(self.matrix, axis=0)
        if np.any(np.abs(norms - 1.0) > UNIT_TOL):
            raise DomainError("weight columns must have unit norm")

    @property
    def feature_dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_classes(self) -> int:
        return self.matrix.shape[1]

    def pairwise_dots(self) -> np.ndarray:
        """Off-diagonal entries of the Gram matrix, flattened."""
        gram = self.matrix.T @ self.matrix
        c = gram.shape[0]
        return gram[~np.eye(c, dtype=bool)]


def _check_counts(num_classes: int, feature_dim: int) -> None:
    if num_classes < 2:
        raise DomainError(f"need at least 2 classes, got {num_classes}")
    if feature_dim < 2:
        raise DomainError(f"need feature dim >= 2, got {feature_dim}")


def s_lower_bound(num_classes: int, p_w: float) -> float:
    """Smallest scale that lets every class center reach posterior p_w.

    ((C-1)/C) * ln((C-1) p_w / (1 - p_w)), natural log; equality is
    attained on a regular simplex (C <= K+1).
    """
    if num_classes < 2:
        raise DomainError(f"need at least 2 classes, got {num_classes}")
    if not 0.0 < p_w < 1.0:
        raise DomainError(f"p_w must lie in (0, 1), got {p_w}")
    c = float(num_classes)
    return (c - 1.0) / c * math.log((c - 1.0) * p_w / (1.0 - p_w))


def m_scope(num_classes: int, feature_dim: int) -> MarginScope:
    """Feasible scope of the cosine margin: 1 - max achievable pairwise
    cosine among C optimally spread unit vectors in K dims.

    K = 2 is the uniform circle (exact for all C); otherwise the regular
    simplex gives C/(C-1), exact only while C <= K+1 and merely an upper
    ceiling (m must stay well below it) beyond that.
    """
    _check_counts(num_classes, feature_dim)
    c = num_classes
    if feature_dim == 2:
        return MarginScope(1.0 - math.cos(2.0 * math.pi / c), BoundKind.EXACT)
    if c <= feature_dim + 1:
        return MarginScope(c / (c - 1.0), BoundKind.EXACT)
    return MarginScope(c / (c - 1.0), BoundKind.SOFT)


def _helmert_rows(c: int) -> np.ndarray:
    """(c-1) x c orthonormal basis of the hyperplane orthogonal to the
    all-ones vector."""
    rows = np.zeros((c - 1, c))
    for i in range(1, c):
        rows[i - 1, :i] = 1.0
        rows[i - 1, i] = -float(i)
        rows[i - 1] /= math.sqrt(i * (i + 1))
    return rows


def simplex_weights(num_classes: int, feature_dim: int) -> WeightConfig:
    """Optimally spread unit weight columns.

    K = 2: C vectors at angles 2*pi*i/C on the unit circle. K > 2: the
    regular simplex (all pairwise dots -1/(C-1), zero sum), which exists
    only for C <= K+1.
    """
    _check_counts(num_classes, feature_dim)
    c, k = num_classes, feature_dim
    if k == 2:
        angles = 2.0 * math.pi * np.arange(c) / c
        return WeightConfig(np.vstack([np.cos(angles), np.sin(angles)]))
    if c > k + 1:
        raise InfeasibleConfigurationError(
            f"a regular simplex of {c} unit vectors needs at least "
            f"{c - 1} dimensions, got {k}")
    # scaled Helmert rows: columns are unit, pairwise dots -1/(C-1), sum 0
    core = math.sqrt(c / (c - 1.0)) * _helmert_rows(c)
    w = np.zeros((k, c))
    w[: c - 1] = core
    return WeightConfig(w)


def min_center_posterior(config: WeightConfig, s: float) -> float:
    """Minimum over classes of the softmax posterior of a feature sitting
    exactly on its class weight vector (direct evaluation, no autodiff)."""
    gram = config.matrix.T @ config.matrix
    z = s * gram
    z -= z.max(axis=1, keepdims=True)
    expz = np.exp(z)
    posteriors = np.diag(expz) / expz.sum(axis=1)
    return float(posteriors.min())


def verify_weight_inequalities(
        config: WeightConfig,
        s_values: Sequence[float] = (1.0, 8.0, 64.0)) -> list[OracleEvidence]:
    """Check the three inequalities behind the scale bound on a concrete
    unit configuration.

    (a) sum of off-diagonal pairwise dots >= -C;
    (b) max off-diagonal dot >= -1/(C-1);
    (c) for each s: mean of exp(s * dots) >= exp(s * mean dot) (convexity).
    """
    c = config.num_classes
    dots = config.pairwise_dots()

    def tol(*vals: float) -> float:
        return 1e-9 * max(1.0, *(abs(v) for v in vals))

    evidence = []
    total = float(dots.sum())
    evidence.append(OracleEvidence(
        "sum of pairwise dots >= -C", total, -float(c),
        total >= -float(c) - tol(total, c)))
    max_dot = float(dots.max())
    bound_b = -1.0 / (c - 1.0)
    evidence.append(OracleEvidence(
        "max pairwise dot >= -1/(C-1)", max_dot, bound_b,
        max_dot >= bound_b - tol(max_dot, bound_b)))
    mean_dot = float(dots.mean())
    for s in s_values:
        lhs = float(np.exp(s * dots).mean())
        rhs = float(math.exp(s * mean_dot))
        evidence.append(OracleEvidence(
            f"convexity: mean(exp(s*dots)) >= exp(s*mean) at s={s:g}",
            lhs, rhs, lhs >= rhs - tol(lhs, rhs)))
    return evidence


def max_min_angle_dot(num_classes: int, feature_dim: int, *,
                      restarts: int = 8, iters: int = 800,
                      seed: int = 0) -> float:
    """Brute-force spread oracle: minimize the maximum pairwise dot of C
    unit vectors by random-restart projected descent on a softmax
    relaxation of the max. Returns the best max-dot found.
    """
    _check_counts(num_classes, feature_dim)
    rng = np.random.default_rng(seed)
    c, k = num_classes, feature_dim
    off = ~np.eye(c, dtype=bool)
    best = 1.0
    for _ in range(restarts):
        w = rng.normal(size=(k, c))
        w /= np.linalg.norm(w, axis=0)
        for it in range(iters):
            beta = 20.0 * (20.0 ** (it / max(iters - 1, 1)))
            lr = 0.3 * (0.02 ** (it / max(iters - 1, 1)))
            gram = w.T @ w
            logits = beta * np.where(off, gram, -np.inf)
            logits -= logits.max()
            p = np.exp(logits)
            p /= p.sum()
            grad = w @ (p + p.T)          # d(sum p_ij d_ij)/dW, symmetrized
            grad -= w * np.sum(grad * w, axis=0)  # tangent projection
            w -= lr * grad
            w /= np.linalg.norm(w, axis=0)
        best = min(best, float((w.T @ w)[off].max()))
    return best


@dataclass
class BoundReport:
    """Closed-form bounds for a (C, K, P_W) setting plus the independent
    evidence gathered for them."""

    num_classes: int
    feature_dim: int
    p_w: float
    s_lower: float
    m_upper: float
    m_bound_kind: BoundKind
    oracle_evidence: list[OracleEvidence] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "feature_dim": self.feature_dim,
            "p_w": self.p_w,
            "s_lower": self.s_lower,
            "m_upper": self.m_upper,
            "m_bound_kind": self.m_bound_kind.value,
            "oracle_evidence": [e.to_dict() for e in self.oracle_evidence],
        }


def bound_report(num_classes: int, feature_dim: int, p_w: float,
                 s: Optional[float] = None,
                 m: Optional[float] = None) -> BoundReport:
    """Assemble bounds and evidence for one setting.

    When a regular simplex exists (C <= K+1) the equality conditions are
    exercised on it; supplied s and m values are checked against their
    bounds and reported as additional evidence rows.
    """
    s_low = s_lower_bound(num_classes, p_w)
    scope = m_scope(num_classes, feature_dim)
    evidence: list[OracleEvidence] = []

    if num_classes <= feature_dim + 1:
        config = simplex_weights(num_classes, feature_dim)
        posterior = min_center_posterior(config, s_low)
        evidence.append(OracleEvidence(
            "min class-center posterior at s = s_lower equals p_w "
            "(simplex equality condition)",
            posterior, p_w, abs(posterior - p_w) <= 1e-9))
        evidence.extend(verify_weight_inequalities(config))

    if s is not None:
        evidence.append(OracleEvidence(
            f"supplied s = {s:g} meets the lower bound",
            float(s), s_low, s >= s_low - 1e-12))
    if m is not None:
        soft = " (soft ceiling: m should stay well below it)" \
            if scope.kind == BoundKind.SOFT else ""
        evidence.append(OracleEvidence(
            f"supplied m = {m:g} within the margin scope{soft}",
            float(m), scope.m_upper, m <= scope.m_upper + 1e-12))
    evidence.append(OracleEvidence(
        "m_upper within the trainable margin range [0, 1)",
        scope.m_upper, 1.0, scope.m_upper <= 1.0))

    return BoundReport(num_classes, feature_dim, p_w, s_low,
                       scope.m_upper, scope.kind, evidence)


# ---------------------------------------------------------------------------
# decision regions


class RegionLabel(IntEnum):
    C1 = 0
    C2 = 1
    MARGIN = 2    # neither class claims the cell
    OVERLAP = 3   # both claims hold (or train/test rules disagree)


REGION_NAMES = {
    RegionLabel.C1: "C1",
    RegionLabel.C2: "C2",
    RegionLabel.MARGIN: "MARGIN",
    RegionLabel.OVERLAP: "OVERLAP",
}

BOUNDARY_KINDS = ("softmax", "nsl", "asoftmax", "lmcl")


@dataclass
class RegionGrid:
    """Labeled decision grid for a two-class boundary rule.

    ``labels[i, j]`` is the label at (axis1[i], axis2[j]). Axes hold
    cosines for the cosine-space kinds (softmax, nsl, lmcl) and radian
    angles in [0, pi] for asoftmax.
    """

    kind: str
    space: str                 # "cosine" | "angle"
    axis1: np.ndarray
    axis2: np.ndarray
    labels: np.ndarray

    @property
    def spacing(self) -> float:
        return float(self.axis1[1] - self.axis1[0])


def _combine(claim1: np.ndarray, claim2: np.ndarray) -> np.ndarray:
    labels = np.full(claim1.shape, int(RegionLabel.MARGIN), dtype=np.int8)
    labels[claim1 & ~claim2] = int(RegionLabel.C1)
    labels[~claim1 & claim2] = int(RegionLabel.C2)
    labels[claim1 & claim2] = int(RegionLabel.OVERLAP)
    return labels


def decision_regions(kind: str, *, m: Optional[float] = None,
                     multiplier: Optional[float] = None,
                     weight_norms: Optional[tuple[float, float]] = None,
                     resolution: int = 512) -> RegionGrid:
    """Label a grid with the two-class decision regions of one loss kind.

    softmax: cells where the raw-logit rule (with the given weight norms)
    and the cosine rule disagree are OVERLAP; nsl partitions the plane;
    lmcl leaves a MARGIN band of perpendicular width sqrt(2)*m; asoftmax
    compares cos(multiplier * theta) against cos(theta') in angle space.
    """
    if kind not in BOUNDARY_KINDS:
        raise ConfigError(f"unknown boundary kind {kind!r}")
    if resolution < 2:
        raise ConfigError(f"grid resolution must be >= 2, got {resolution}")

    if kind == "asoftmax":
        if multiplier is None or multiplier < 1:
            raise ConfigError("asoftmax needs an angle multiplier >= 1")
        t = np.linspace(0.0, math.pi, resolution)
        t1, t2 = np.meshgrid(t, t, indexing="ij")
        claim1 = np.cos(multiplier * t1) >= np.cos(t2)
        claim2 = np.cos(multiplier * t2) >= np.cos(t1)
        return RegionGrid(kind, "angle", t, t.copy(), _combine(claim1, claim2))

    u_axis = np.linspace(-1.0, 1.0, resolution)
    u, v = np.meshgrid(u_axis, u_axis, indexing="ij")
    if kind == "nsl":
        labels = _combine(u >= v, v > u)
    elif kind == "lmcl":
        if m is None or not 0.0 <= m < 1.0:
            raise ConfigError("lmcl needs a margin m in [0, 1)")
        labels = _combine(u >= v + m, v > u + m)
    else:  # softmax
        if weight_norms is None or min(weight_norms) <= 0.0:
            raise ConfigError("softmax needs a pair of positive weight norms")
        n1, n2 = weight_norms
        train_c1 = n1 * u >= n2 * v
        test_c1 = u >= v
        # agreement -> the agreed class; disagreement -> conflicting claims
        labels = np.full(u.shape, int(RegionLabel.OVERLAP), dtype=np.int8)
        labels[train_c1 & test_c1] = int(RegionLabel.C1)
        labels[~train_c1 & ~test_c1] = int(RegionLabel.C2)
    return RegionGrid(kind, "cosine", u_axis, u_axis.copy(), labels)


def margin_width_by_slice(grid: RegionGrid) -> np.ndarray:
    """Width of the MARGIN band along axis1 for each fixed axis2 value,
    in axis units (cell count times spacing)."""
    counts = (grid.labels == int(RegionLabel.MARGIN)).sum(axis=0)
    return counts * grid.spacing


def margin_band_width(grid: RegionGrid, m: Optional[float] = None) -> float:
    """Median perpendicular width of the MARGIN band of a cosine-space
    grid.

    The band runs along the main diagonal, so a horizontal count of w
    cells corresponds to a perpendicular width w*h/sqrt(2). Slices where
    the band is clipped by the domain boundary are excluded (needs the
    margin m for lmcl grids; pass 0 to keep all slices).
    """
    if grid.space != "cosine":
        raise ConfigError("band width is defined for cosine-space grids")
    widths = margin_width_by_slice(grid)
    if m:
        keep = np.abs(grid.axis2) <= 1.0 - m - grid.spacing
        widths = widths[keep]
    if widths.size == 0 or widths.max() == 0.0:
        return 0.0
    return float(np.median(widths)) / math.sqrt(2.0)


def lmcl_margin_width(m: float) -> float:
    """Predicted perpendicular width of the lmcl margin band in cosine
    space: sqrt(2) * m."""
    return math.sqrt(2.0) * m
