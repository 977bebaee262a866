"""Cosine-similarity verification and identification metrics.

Verification thresholds cosine scores of feature pairs; identification
ranks probes against a gallery. Threshold selection is an exhaustive sweep
over midpoints of the sorted scores (desk scale makes O(n log n) fine), and
the accept rule is always ``score >= threshold``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CsvFormatError, DegenerateVectorError, ProtocolError
from .tensor import as_matrix


def _unit_rows(feats: np.ndarray, what: str) -> np.ndarray:
    norms = np.linalg.norm(feats, axis=1, keepdims=True)
    if np.any(norms <= 1e-12):
        raise DegenerateVectorError(f"{what}: zero-norm feature")
    return feats / norms


@dataclass
class PairSet:
    """Feature pairs with a same-identity flag per pair."""

    features_a: np.ndarray
    features_b: np.ndarray
    same: np.ndarray

    def __post_init__(self):
        self.features_a = as_matrix(self.features_a)
        self.features_b = as_matrix(self.features_b)
        self.same = np.asarray(self.same, dtype=bool).reshape(-1)
        n = self.same.size
        if n == 0:
            raise ProtocolError("pair set is empty")
        if self.features_a.shape != self.features_b.shape or \
                self.features_a.shape[0] != n:
            raise ProtocolError("pair set features/flags have mismatched sizes")
        _unit_rows(self.features_a, "pair set")
        _unit_rows(self.features_b, "pair set")

    def scores(self) -> np.ndarray:
        a = _unit_rows(self.features_a, "pair set")
        b = _unit_rows(self.features_b, "pair set")
        return np.sum(a * b, axis=1)


@dataclass
class GalleryProbe:
    """Gallery and probe features with identity labels."""

    gallery_features: np.ndarray
    gallery_ids: list[str]
    probe_features: np.ndarray
    probe_ids: list[str]

    def __post_init__(self):
        self.gallery_features = as_matrix(self.gallery_features)
        self.probe_features = as_matrix(self.probe_features)
        self.gallery_ids = [str(i) for i in self.gallery_ids]
        self.probe_ids = [str(i) for i in self.probe_ids]
        if len(self.gallery_ids) != self.gallery_features.shape[0] or \
                len(self.probe_ids) != self.probe_features.shape[0]:
            raise ProtocolError("id count does not match feature rows")
        if not self.gallery_ids or not self.probe_ids:
            raise ProtocolError("gallery and probe sets must be non-empty")
        missing = set(self.probe_ids) - set(self.gallery_ids)
        if missing:
            raise ProtocolError(
                f"probe identities missing from gallery: {sorted(missing)[:5]}")


def cosine_score(a, b) -> float:
    """Cosine of the angle between two vectors (dot of unit vectors)."""
    va = np.asarray(a, dtype=np.float64).reshape(-1)
    vb = np.asarray(b, dtype=np.float64).reshape(-1)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na <= 1e-12 or nb <= 1e-12:
        raise DegenerateVectorError("cosine_score: zero vector")
    return float(va @ vb / (na * nb))


def verification_accuracy(pairs: PairSet) -> tuple[float, float]:
    """Best-threshold verification accuracy.

    Sweeps every midpoint of the sorted scores (plus the accept-all and
    reject-all ends); ties break toward the lower threshold.
    """
    same = pairs.same
    if same.all() or not same.any():
        raise ProtocolError(
            "need at least one positive and one negative pair")
    scores = pairs.scores()
    order = np.argsort(scores, kind="stable")
    s_sorted = scores[order]
    same_sorted = same[order]
    n = s_sorted.size
    # cut k accepts indices k..n-1 as "same"
    pos_suffix = np.concatenate([np.cumsum(same_sorted[::-1])[::-1], [0]])
    neg_prefix = np.concatenate([[0], np.cumsum(~same_sorted)])
    best_acc = -1.0
    best_t = 0.0
    for k in range(n + 1):
        if 0 < k < n and s_sorted[k - 1] == s_sorted[k]:
            continue  # not realizable by any threshold
        if k == 0:
            t = s_sorted[0] - 1.0
        elif k == n:
            t = s_sorted[-1] + 1.0
        else:
            t = 0.5 * (s_sorted[k - 1] + s_sorted[k])
        acc = (pos_suffix[k] + neg_prefix[k]) / n
        if acc > best_acc:
            best_acc, best_t = acc, t
    return float(best_t), float(best_acc)


def tar_at_far(pairs: PairSet, far: float) -> float:
    """True-accept rate at the given false-accept rate.

    The threshold is the smallest negative score whose strict exceedance
    keeps the empirical FAR at or below ``far`` (conservative choice).
    """
    if not 0.0 < far <= 1.0:
        raise ProtocolError(f"far must lie in (0, 1], got {far}")
    scores = pairs.scores()
    neg = scores[~pairs.same]
    pos = scores[pairs.same]
    if neg.size == 0 or pos.size == 0:
        raise ProtocolError("need at least one positive and one negative pair")
    if far * neg.size < 1.0:
        raise ProtocolError(
            f"far={far:g} needs at least {math.ceil(1.0 / far)} negative "
            f"pairs, got {neg.size}")
    allowed = int(far * neg.size)
    if allowed >= neg.size:
        return 1.0
    threshold = np.sort(neg)[::-1][allowed]
    return float(np.mean(pos > threshold))


def rank1_identification(gp: GalleryProbe) -> float:
    """Fraction of probes whose nearest gallery feature (by cosine) carries
    the right identity; ties go to the lowest gallery index."""
    g = _unit_rows(gp.gallery_features, "gallery")
    p = _unit_rows(gp.probe_features, "probes")
    nearest = np.argmax(p @ g.T, axis=1)  # argmax takes the first maximum
    gallery_ids = np.array(gp.gallery_ids, dtype=object)
    hits = gallery_ids[nearest] == np.array(gp.probe_ids, dtype=object)
    return float(np.mean(hits))


def sample_pairs(features, labels, num_pos: int, num_neg: int,
                 seed: int) -> PairSet:
    """Seeded random same/different pairs drawn from labeled features."""
    feats = as_matrix(features)
    labels = np.asarray(labels).reshape(-1)
    classes = np.unique(labels)
    rich = [c for c in classes if np.sum(labels == c) >= 2]
    if num_pos > 0 and not rich:
        raise ProtocolError("no class has two samples to form positive pairs")
    if num_neg > 0 and classes.size < 2:
        raise ProtocolError("need two classes to form negative pairs")
    rng = np.random.default_rng(seed)
    a_rows, b_rows, same = [], [], []
    for _ in range(num_pos):
        c = rich[rng.integers(len(rich))]
        i, j = rng.choice(np.flatnonzero(labels == c), size=2, replace=False)
        a_rows.append(feats[i])
        b_rows.append(feats[j])
        same.append(True)
    for _ in range(num_neg):
        ca, cb = rng.choice(classes, size=2, replace=False)
        i = rng.choice(np.flatnonzero(labels == ca))
        j = rng.choice(np.flatnonzero(labels == cb))
        a_rows.append(feats[i])
        b_rows.append(feats[j])
        same.append(False)
    return PairSet(np.array(a_rows), np.array(b_rows), np.array(same))


# ---------------------------------------------------------------------------
# CSV interchange


def _parse_floats(cells: Sequence[str], line: int) -> list[float]:
    try:
        return [float(c) for c in cells]
    except ValueError as exc:
        raise CsvFormatError(str(exc), line) from exc


def write_pairs_csv(path, pairs: PairSet, ids_a: Sequence[str],
                    ids_b: Sequence[str]) -> None:
    k = pairs.features_a.shape[1]
    header = (["id_a", "id_b"] + [f"a{i}" for i in range(k)]
              + [f"b{i}" for i in range(k)])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for ia, ib, fa, fb in zip(ids_a, ids_b, pairs.features_a,
                                  pairs.features_b):
            writer.writerow([ia, ib] + [repr(v) for v in fa]
                            + [repr(v) for v in fb])


def read_pairs_csv(path) -> PairSet:
    """Pairs file: id_a, id_b, a0..aK-1, b0..bK-1; a pair is positive when
    the two identities are equal."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ProtocolError(f"{path}: pair file is empty")
    header = rows[0]
    if len(header) < 4 or header[:2] != ["id_a", "id_b"]:
        raise CsvFormatError("expected header id_a,id_b,a0..,b0..", 1)
    if (len(header) - 2) % 2 != 0:
        raise CsvFormatError("feature columns must split evenly", 1)
    k = (len(header) - 2) // 2
    a_rows, b_rows, same = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CsvFormatError(
                f"expected {len(header)} columns, got {len(row)}", lineno)
        vals = _parse_floats(row[2:], lineno)
        a_rows.append(vals[:k])
        b_rows.append(vals[k:])
        same.append(row[0] == row[1])
    if not a_rows:
        raise ProtocolError(f"{path}: pair file has no data rows")
    return PairSet(np.array(a_rows), np.array(b_rows), np.array(same))


def write_features_csv(path, ids: Sequence[str], features) -> None:
    feats = as_matrix(features)
    header = ["id"] + [f"f{i}" for i in range(feats.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, row in zip(ids, feats):
            writer.writerow([i] + [repr(v) for v in row])


def read_features_csv(path) -> tuple[list[str], np.ndarray]:
    """Feature file: id, f0..fK-1 (one row per sample)."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ProtocolError(f"{path}: feature file is empty")
    header = rows[0]
    if len(header) < 2 or header[0] != "id":
        raise CsvFormatError("expected header id,f0,f1,...", 1)
    ids, feats = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise CsvFormatError(
                f"expected {len(header)} columns, got {len(row)}", lineno)
        ids.append(row[0])
        feats.append(_parse_floats(row[1:], lineno))
    if not ids:
        raise ProtocolError(f"{path}: feature file has no data rows")
    return ids, np.array(feats)
