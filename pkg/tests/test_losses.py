"""Loss forward values against direct-formula oracles, gradient checks,
and the identities tying the three variants together."""

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import check_grads, max_rel_err
from marginlab import (Batch, ClassWeights, ConfigError, Graph, LossKind,
                       LossSpec, ShapeError, evaluate_loss, lmcl_loss,
                       loss_gradients, nsl_loss, softmax_loss)
from marginlab.losses import cross_entropy_from_logits, margin_logits

RNG = np.random.default_rng(7)


def random_case(n=5, k=3, c=4, seed=0):
    rng = np.random.default_rng(seed)
    batch = Batch(rng.normal(size=(n, k)) + 0.1,
                  rng.integers(0, c, size=n), c)
    weights = ClassWeights(rng.normal(size=(k, c)) + 0.1)
    return batch, weights


def batch_with_cosines(cos_target, cos_other):
    """One unit feature along e1 and two unit weight columns realizing the
    requested cosines."""
    batch = Batch(np.array([[1.0, 0.0]]), [0], 2)
    w = np.array([[cos_target, cos_other],
                  [math.sqrt(1 - cos_target ** 2),
                   math.sqrt(1 - cos_other ** 2)]])
    return batch, ClassWeights(w)


# -- softmax ------------------------------------------------------------------

def test_softmax_saturated_correct_class():
    batch = Batch(np.array([[100.0, 0.0]]), [0], 2)
    weights = ClassWeights(np.array([[1.0, -1.0], [0.0, 0.0]]))
    g = Graph()
    assert g.value(softmax_loss(g, batch, weights))[0, 0] < 1e-8


def test_softmax_uniform_posterior_is_ln2():
    batch = Batch(np.array([[1.0, 0.0]]), [0], 2)
    weights = ClassWeights(np.array([[0.0, 0.0], [1.0, -1.0]]))  # logits 0,0
    g = Graph()
    loss = g.value(softmax_loss(g, batch, weights))[0, 0]
    assert loss == pytest.approx(0.6931471805599453, abs=1e-15)


def test_softmax_matches_high_precision_logsumexp():
    batch, weights = random_case(n=4, k=3, c=3, seed=11)
    g = Graph()
    got = g.value(softmax_loss(g, batch, weights))[0, 0]

    mpmath.mp.dps = 50
    logits = batch.features @ weights.matrix
    total = mpmath.mpf(0)
    for row, label in zip(logits, batch.labels):
        lse = mpmath.log(mpmath.fsum(mpmath.e ** mpmath.mpf(v) for v in row))
        total += lse - mpmath.mpf(row[label])
    expected = float(total / len(batch.labels))
    assert abs(got - expected) <= 1e-12


def test_softmax_shape_mismatch():
    batch = Batch(np.ones((2, 3)), [0, 1], 2)
    weights = ClassWeights(np.ones((4, 2)))
    g = Graph()
    with pytest.raises(ShapeError):
        softmax_loss(g, batch, weights)


# -- nsl ----------------------------------------------------------------------

def test_nsl_frozen_value():
    # s=1, cos(target)=1, cos(other)=-1 -> ln(1 + e^-2)
    batch, weights = batch_with_cosines(1.0, -1.0)
    g = Graph()
    loss = g.value(nsl_loss(g, batch, weights, LossSpec.nsl(1.0)))[0, 0]
    assert loss == pytest.approx(0.1269280110429725, abs=1e-12)


def test_nsl_radial_invariance_under_x100():
    batch, weights = random_case(seed=3)
    spec = LossSpec.nsl(16.0)
    base = evaluate_loss(spec, batch, weights)
    scaled = Batch(batch.features * 100.0, batch.labels, batch.num_classes)
    assert abs(evaluate_loss(spec, scaled, weights) - base) < 1e-10


def test_nsl_rejects_wrong_variant():
    batch, weights = random_case()
    with pytest.raises(ConfigError):
        nsl_loss(Graph(), batch, weights, LossSpec.lmcl(4.0, 0.1))


# -- lmcl ---------------------------------------------------------------------

def test_lmcl_frozen_value():
    # s=2, m=0.35, cos(target)=0.9, cos(other)=0.1 -> ln(1 + e^-0.9)
    batch, weights = batch_with_cosines(0.9, 0.1)
    g = Graph()
    loss = g.value(lmcl_loss(g, batch, weights, LossSpec.lmcl(2.0, 0.35)))[0, 0]
    assert loss == pytest.approx(0.3411538747320878, abs=1e-12)


def test_lmcl_m_zero_equals_nsl_exactly():
    for seed in range(5):
        batch, weights = random_case(seed=seed)
        a = evaluate_loss(LossSpec.lmcl(8.0, 0.0), batch, weights)
        b = evaluate_loss(LossSpec.nsl(8.0), batch, weights)
        assert a == b


def test_lmcl_loss_increases_with_margin():
    batch, weights = random_case(seed=5)
    losses = [evaluate_loss(LossSpec.lmcl(8.0, m), batch, weights)
              for m in (0.0, 0.1, 0.2)]
    assert losses[0] < losses[1] < losses[2]


def test_lmcl_rejects_bad_margin():
    with pytest.raises(ConfigError):
        LossSpec.lmcl(8.0, -0.1)
    with pytest.raises(ConfigError):
        LossSpec.lmcl(8.0, 1.0)


def test_spec_rejects_margin_on_other_variants():
    with pytest.raises(ConfigError):
        LossSpec(LossKind.NSL, s=4.0, m=0.1)
    with pytest.raises(ConfigError):
        LossSpec(LossKind.NSL, s=0.0)


# -- the three-way identity ----------------------------------------------------

def test_loss_identity_lmcl_nsl_softmax_of_scaled_cosines():
    s = 30.0
    for seed in range(10):
        batch, weights = random_case(seed=seed)
        nsl = evaluate_loss(LossSpec.nsl(s), batch, weights)
        lmcl0 = evaluate_loss(LossSpec.lmcl(s, 0.0), batch, weights)
        # softmax fed pre-scaled unit features and unit weight columns
        x_hat = batch.features / np.linalg.norm(batch.features, axis=1,
                                                keepdims=True)
        w_hat = weights.matrix / np.linalg.norm(weights.matrix, axis=0)
        pre = Batch(s * x_hat, batch.labels, batch.num_classes)
        soft = evaluate_loss(LossSpec.softmax(), pre, ClassWeights(w_hat))
        assert abs(nsl - lmcl0) <= 1e-12
        assert abs(nsl - soft) <= 1e-12


# -- gradients -----------------------------------------------------------------

def build_loss_scalar(spec, labels, num_classes):
    def build(g, x, w):
        logits = margin_logits(g, x, w, labels, spec)
        return cross_entropy_from_logits(g, logits, labels)
    return build


@pytest.mark.parametrize("spec", [
    LossSpec.softmax(),
    LossSpec.nsl(8.0),
    LossSpec.lmcl(8.0, 0.25),
])
def test_loss_gradients_match_fd(spec):
    batch, weights = random_case(n=5, k=3, c=4, seed=23)
    check_grads(build_loss_scalar(spec, batch.labels, batch.num_classes),
                [batch.features, weights.matrix], tol=1e-5)


def test_unnormalized_feature_gradients_match_fd():
    batch, weights = random_case(n=4, k=3, c=3, seed=29)
    spec = LossSpec.lmcl(8.0, 0.2)

    def build(g, x, w):
        logits = margin_logits(g, x, w, batch.labels, spec,
                               normalize_features=False)
        return cross_entropy_from_logits(g, logits, batch.labels)

    check_grads(build, [batch.features, weights.matrix], tol=1e-5)


def test_saturated_batch_gradient_is_negligible():
    # all samples classified with a wide cosine gap and s=64
    batch = Batch(np.array([[1.0, 0.0], [0.0, 1.0]]), [0, 1], 2)
    weights = ClassWeights(np.array([[1.0, 0.0], [0.0, 1.0]]))
    d_feat, d_w = loss_gradients(LossSpec.lmcl(64.0, 0.2), batch, weights)
    assert np.linalg.norm(d_feat) < 1e-6
    assert np.linalg.norm(d_w) < 1e-6


def test_lmcl_m0_gradients_equal_nsl_gradients():
    batch, weights = random_case(seed=31)
    d_feat_a, d_w_a = loss_gradients(LossSpec.lmcl(8.0, 0.0), batch, weights)
    d_feat_b, d_w_b = loss_gradients(LossSpec.nsl(8.0), batch, weights)
    assert np.array_equal(d_feat_a, d_feat_b)
    assert np.array_equal(d_w_a, d_w_b)


def test_loss_gradients_deterministic():
    batch, weights = random_case(seed=37)
    spec = LossSpec.lmcl(16.0, 0.3)
    first = loss_gradients(spec, batch, weights)
    second = loss_gradients(spec, batch, weights)
    assert np.array_equal(first[0], second[0])
    assert np.array_equal(first[1], second[1])


# -- invariants ------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.01, max_value=1000.0),
       st.integers(min_value=0, max_value=4),
       st.sampled_from(["feature", "weight"]))
def test_radial_invariance_property(factor, row, which):
    batch, weights = random_case(n=5, k=3, c=4, seed=13)
    spec = LossSpec.lmcl(30.0, 0.2)
    base = evaluate_loss(spec, batch, weights)
    if which == "feature":
        feats = batch.features.copy()
        feats[row] *= factor
        perturbed = evaluate_loss(spec, Batch(feats, batch.labels,
                                              batch.num_classes), weights)
    else:
        w = weights.matrix.copy()
        w[:, row % w.shape[1]] *= factor
        perturbed = evaluate_loss(spec, batch, ClassWeights(w))
    assert abs(perturbed - base) < 1e-10


def test_loss_decreases_with_scale_on_separable_batch():
    # every target cosine exceeds all others by more than m
    batch = Batch(np.array([[1.0, 0.05], [0.1, 1.0], [0.9, 0.2]]),
                  [0, 1, 0], 2)
    weights = ClassWeights(np.array([[1.0, 0.0], [0.0, 1.0]]))
    m = 0.2
    losses = [evaluate_loss(LossSpec.lmcl(s, m), batch, weights)
              for s in (1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0)]
    assert all(a > b for a, b in zip(losses, losses[1:]))


@pytest.mark.parametrize("spec,bound", [
    (LossSpec.nsl(30.0), 30.0),
    (LossSpec.lmcl(30.0, 0.35), 30.0 * 1.35),
])
def test_logits_bounded_by_scale(spec, bound):
    batch, weights = random_case(n=8, k=4, c=5, seed=17)
    g = Graph()
    x = g.leaf(batch.features)
    w = g.leaf(weights.matrix)
    logits = margin_logits(g, x, w, batch.labels, spec)
    assert np.max(np.abs(g.value(logits))) <= bound + 1e-9


def test_margin_only_shifts_target_logit():
    batch, weights = random_case(n=6, k=3, c=4, seed=19)
    g0, g1 = Graph(), Graph()
    plain = margin_logits(g0, g0.leaf(batch.features),
                          g0.leaf(weights.matrix), batch.labels,
                          LossSpec.nsl(10.0))
    shifted = margin_logits(g1, g1.leaf(batch.features),
                            g1.leaf(weights.matrix), batch.labels,
                            LossSpec.lmcl(10.0, 0.3))
    delta = g0.value(plain) - g1.value(shifted)
    rows = np.arange(len(batch.labels))
    assert np.allclose(delta[rows, batch.labels], 10.0 * 0.3, atol=1e-12)
    delta[rows, batch.labels] = 0.0
    assert np.max(np.abs(delta)) == 0.0
