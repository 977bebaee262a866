"""Dense 2-D float64 matrices with tape-based reverse-mode differentiation.

Values are plain numpy arrays of shape (rows, cols). A :class:`Graph` is an
append-only tape: every operation records a node holding its cached output
and a vjp closure, and :meth:`Graph.backward` runs one reverse sweep from a
scalar root. Graphs are cheap and rebuilt per training step; matrices are
treated as immutable once recorded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateVectorError, DomainError, MarginlabError, ShapeError

NodeId = int

DEFAULT_EPS = 1e-12


def as_matrix(values) -> np.ndarray:
    """Coerce to a finite float64 2-D array (copying defensively)."""
    out = np.array(values, dtype=np.float64)
    if out.ndim == 1:
        out = out.reshape(1, -1)
    if out.ndim != 2:
        raise ShapeError(f"expected a 2-D matrix, got ndim={out.ndim}")
    if not np.all(np.isfinite(out)):
        raise DomainError("matrix contains NaN or Inf entries")
    return out


# vjp: output gradient -> one gradient per input node
_Vjp = Callable[[np.ndarray], tuple[np.ndarray, ...]]


@dataclass
class _Node:
    op: str
    inputs: tuple[NodeId, ...]
    value: np.ndarray
    vjp: Optional[_Vjp]


@dataclass
class Graph:
    """Append-only record of operations over matrices.

    Single-threaded by design; build one Graph per loss evaluation or
    training step. Node ids are indices into the tape, so inputs always
    precede their consumers.
    """

    nodes: list[_Node] = field(default_factory=list)
    _grads: Optional[list[Optional[np.ndarray]]] = None

    # -- tape plumbing ----------------------------------------------------

    def _record(self, op: str, inputs: tuple[NodeId, ...], value: np.ndarray,
                vjp: Optional[_Vjp]) -> NodeId:
        if not np.all(np.isfinite(value)):
            raise DomainError(f"{op} produced a non-finite value")
        self.nodes.append(_Node(op, inputs, value, vjp))
        self._grads = None
        return len(self.nodes) - 1

    def _val(self, nid: NodeId) -> np.ndarray:
        if not 0 <= nid < len(self.nodes):
            raise MarginlabError(f"node id {nid} not in graph")
        return self.nodes[nid].value

    def value(self, nid: NodeId) -> np.ndarray:
        """Cached forward value of a node."""
        return self._val(nid)

    def leaf(self, values) -> NodeId:
        """Record an input node (parameter or constant)."""
        return self._record("leaf", (), as_matrix(values), None)

    # -- arithmetic -------------------------------------------------------

    def add(self, a: NodeId, b: NodeId) -> NodeId:
        va, vb = self._val(a), self._val(b)
        if va.shape != vb.shape:
            raise ShapeError(f"add: shapes {va.shape} and {vb.shape} differ")
        return self._record("add", (a, b), va + vb, lambda g: (g, g))

    def sub(self, a: NodeId, b: NodeId) -> NodeId:
        va, vb = self._val(a), self._val(b)
        if va.shape != vb.shape:
            raise ShapeError(f"sub: shapes {va.shape} and {vb.shape} differ")
        return self._record("sub", (a, b), va - vb, lambda g: (g, -g))

    def scale(self, a: NodeId, c: float) -> NodeId:
        """Multiply every entry by the constant c."""
        c = float(c)
        return self._record("scale", (a,), self._val(a) * c, lambda g: (g * c,))

    def add_const(self, a: NodeId, m) -> NodeId:
        """Add a constant matrix (no gradient flows into it)."""
        va, vm = self._val(a), as_matrix(m)
        if va.shape != vm.shape:
            raise ShapeError(f"add_const: shapes {va.shape} and {vm.shape} differ")
        return self._record("add_const", (a,), va + vm, lambda g: (g,))

    def mul_const(self, a: NodeId, m) -> NodeId:
        """Elementwise product with a constant matrix (mask, one-hot, ...)."""
        va, vm = self._val(a), as_matrix(m)
        if va.shape != vm.shape:
            raise ShapeError(f"mul_const: shapes {va.shape} and {vm.shape} differ")
        return self._record("mul_const", (a,), va * vm, lambda g: (g * vm,))

    def matmul(self, a: NodeId, b: NodeId) -> NodeId:
        va, vb = self._val(a), self._val(b)
        if va.shape[1] != vb.shape[0]:
            raise ShapeError(f"matmul: inner dims {va.shape} x {vb.shape} differ")
        return self._record(
            "matmul", (a, b), va @ vb,
            lambda g: (g @ vb.T, va.T @ g))

    def transpose(self, a: NodeId) -> NodeId:
        va = self._val(a)
        return self._record("transpose", (a,), va.T.copy(), lambda g: (g.T,))

    # -- elementwise nonlinearities ---------------------------------------

    def relu(self, a: NodeId) -> NodeId:
        va = self._val(a)
        mask = va > 0.0
        return self._record("relu", (a,), np.where(mask, va, 0.0),
                            lambda g: (g * mask,))

    def log(self, a: NodeId) -> NodeId:
        va = self._val(a)
        if np.any(va <= 0.0):
            raise DomainError("log: non-positive entry")
        return self._record("log", (a,), np.log(va), lambda g: (g / va,))

    def exp(self, a: NodeId) -> NodeId:
        va = self._val(a)
        out = np.exp(va)
        return self._record("exp", (a,), out, lambda g: (g * out,))

    # -- row-wise operations ----------------------------------------------

    def row_l2_normalize(self, a: NodeId, eps: float = DEFAULT_EPS) -> NodeId:
        """Rescale every row to unit L2 norm.

        For y = x / ||x||:  dL/dx = (g - (g . y) y) / ||x||, row by row.
        """
        va = self._val(a)
        norms = np.linalg.norm(va, axis=1, keepdims=True)
        if np.any(norms <= eps):
            raise DegenerateVectorError(
                f"row_l2_normalize: row norm <= eps ({eps:g})")
        out = va / norms

        def vjp(g: np.ndarray) -> tuple[np.ndarray, ...]:
            proj = np.sum(g * out, axis=1, keepdims=True)
            return ((g - proj * out) / norms,)

        return self._record("row_l2_normalize", (a,), out, vjp)

    def row_norm(self, a: NodeId, eps: float = DEFAULT_EPS) -> NodeId:
        """Per-row L2 norm as an (N, 1) column."""
        va = self._val(a)
        norms = np.linalg.norm(va, axis=1, keepdims=True)
        if np.any(norms <= eps):
            raise DegenerateVectorError(f"row_norm: row norm <= eps ({eps:g})")
        return self._record("row_norm", (a,), norms,
                            lambda g: (g * va / norms,))

    def row_sum(self, a: NodeId) -> NodeId:
        """Sum each row into an (N, 1) column."""
        va = self._val(a)
        return self._record(
            "row_sum", (a,), va.sum(axis=1, keepdims=True),
            lambda g: (np.broadcast_to(g, va.shape).copy(),))

    def row_logsumexp(self, a: NodeId) -> NodeId:
        """Per-row log(sum(exp(.))) with max subtraction; gradient is the
        row softmax."""
        va = self._val(a)
        rowmax = va.max(axis=1, keepdims=True)
        shifted = np.exp(va - rowmax)
        total = shifted.sum(axis=1, keepdims=True)
        out = rowmax + np.log(total)
        softmax = shifted / total
        return self._record("row_logsumexp", (a,), out,
                            lambda g: (g * softmax,))

    def scale_rows_const(self, m, v: NodeId) -> NodeId:
        """Constant matrix m with row i multiplied by the scalar v[i, 0]."""
        vm = as_matrix(m)
        vv = self._val(v)
        if vv.shape != (vm.shape[0], 1):
            raise ShapeError(
                f"scale_rows_const: expected column {(vm.shape[0], 1)}, got {vv.shape}")
        return self._record(
            "scale_rows_const", (v,), vm * vv,
            lambda g: ((g * vm).sum(axis=1, keepdims=True),))

    # -- reductions ---------------------------------------------------------

    def sum_all(self, a: NodeId) -> NodeId:
        va = self._val(a)
        return self._record(
            "sum_all", (a,), np.array([[va.sum()]]),
            lambda g: (np.full_like(va, g[0, 0]),))

    def mean_all(self, a: NodeId) -> NodeId:
        va = self._val(a)
        return self.scale(self.sum_all(a), 1.0 / va.size)

    # -- reverse sweep ------------------------------------------------------

    def backward(self, root: NodeId) -> None:
        """Populate gradients of all ancestors of ``root`` (a 1x1 scalar).

        Accumulators are reset first, so repeated calls are idempotent.
        """
        rv = self._val(root)
        if rv.shape != (1, 1):
            raise ShapeError(f"backward: root must be 1x1, got {rv.shape}")
        grads: list[Optional[np.ndarray]] = [None] * len(self.nodes)
        grads[root] = np.ones_like(rv)
        for nid in range(root, -1, -1):
            g = grads[nid]
            node = self.nodes[nid]
            if g is None or node.vjp is None:
                continue
            for inp, ginp in zip(node.inputs, node.vjp(g)):
                if grads[inp] is None:
                    grads[inp] = np.zeros_like(self.nodes[inp].value)
                grads[inp] += ginp
        self._grads = grads

    def grad(self, nid: NodeId) -> np.ndarray:
        """Gradient accumulated for a node by the last backward() call."""
        if self._grads is None:
            raise MarginlabError("grad requested before backward()")
        g = self._grads[nid]
        if g is None:
            return np.zeros_like(self._val(nid))
        return g


def one_hot(labels: Sequence[int], num_classes: int) -> np.ndarray:
    """(N, C) one-hot float matrix from integer class labels."""
    idx = np.asarray(labels, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("labels must be a flat sequence")
    if idx.size == 0:
        raise ShapeError("labels must be non-empty")
    if idx.min() < 0 or idx.max() >= num_classes:
        raise DomainError(
            f"labels must lie in [0, {num_classes}), got range "
            f"[{idx.min()}, {idx.max()}]")
    out = np.zeros((idx.size, num_classes))
    out[np.arange(idx.size), idx] = 1.0
    return out
