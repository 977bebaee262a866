"""Shared test oracles: central finite differences for gradient checks."""

import numpy as np

from marginlab import Graph


def central_difference(f, x, h=1e-5):
    """Numerical gradient of a scalar function of one matrix input."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        grad[idx] = (f(xp) - f(xm)) / (2.0 * h)
    return grad


def max_rel_err(a, b, floor=1e-3):
    """Largest elementwise relative error, with small entries compared on
    an absolute scale via the floor."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def check_grads(build_scalar, inputs, h=1e-5, tol=1e-6):
    """Compare tape gradients of a scalar-valued graph against central
    finite differences, input by input.

    build_scalar(g, *leaf_ids) must record the graph and return the scalar
    root node. The numeric side only ever evaluates the forward pass.
    """
    g = Graph()
    leaves = [g.leaf(x) for x in inputs]
    root = build_scalar(g, *leaves)
    g.backward(root)
    analytic = [g.grad(leaf) for leaf in leaves]

    for i, x in enumerate(inputs):
        def forward(xp):
            g2 = Graph()
            ls = [g2.leaf(xp if j == i else inputs[j])
                  for j in range(len(inputs))]
            r = build_scalar(g2, *ls)
            return float(g2.value(r)[0, 0])

        numeric = central_difference(forward, np.asarray(x, dtype=float), h)
        err = max_rel_err(analytic[i], numeric)
        assert err <= tol, f"input {i}: rel err {err:.3e} > {tol:.1e}"
