"""Blob generation, SGD determinism, convergence/divergence behavior,
feature extraction, angular statistics, and model serialization."""

import numpy as np
import pytest
from sklearn.cluster import KMeans

from marginlab import (ClassWeights, ConfigError, DegenerateVectorError,
                       LossKind, LossSpec, MlpModel, ShapeError, TrainConfig,
                       TrainingDivergedError, angular_stats,
                       extract_features, generate_blobs, load_model,
                       save_model, simplex_weights, train)


def toy_config(m=0.2, seed=0, epochs=60, **kw):
    return TrainConfig(spec=LossSpec.lmcl(30.0, m), epochs=epochs,
                       batch_size=64, learning_rate=0.1,
                       lr_drop_epochs=(40, 50), weight_decay=5e-4,
                       seed=seed, **kw)


def toy_model(seed=0, hidden=(64,), classes=8, feature_dim=2):
    model = MlpModel.init(2, hidden, feature_dim, classes, seed)
    spread = simplex_weights(classes, feature_dim).matrix
    return MlpModel(model.layers, ClassWeights(spread.copy()),
                    model.activation)


# -- blobs ---------------------------------------------------------------------

def test_blobs_deterministic_per_seed():
    a = generate_blobs(8, 50, 2, 0.3, seed=5)
    b = generate_blobs(8, 50, 2, 0.3, seed=5)
    assert np.array_equal(a.samples, b.samples)
    assert np.array_equal(a.labels, b.labels)
    c = generate_blobs(8, 50, 2, 0.3, seed=6)
    assert not np.array_equal(a.samples, c.samples)


def test_blobs_tiny_dispersion_linearly_separable():
    data = generate_blobs(2, 20, 2, 1e-9, seed=0)
    centers = [data.samples[data.labels == c].mean(axis=0) for c in (0, 1)]
    spread = max(np.abs(data.samples[data.labels == c] - centers[c]).max()
                 for c in (0, 1))
    assert spread < 1e-6
    assert np.linalg.norm(centers[0] - centers[1]) > 1.0


def test_blobs_reject_bad_dispersion():
    with pytest.raises(ConfigError):
        generate_blobs(8, 10, 2, 0.0, seed=0)
    with pytest.raises(ConfigError):
        generate_blobs(8, 10, 2, -0.1, seed=0)


def test_blobs_kmeans_recovers_centers():
    data = generate_blobs(8, 200, 2, 0.2, seed=3)
    km = KMeans(n_clusters=8, n_init=10, random_state=0).fit(data.samples)
    # every true class maps to exactly one recovered cluster
    assignments = [np.bincount(km.labels_[data.labels == c]).argmax()
                   for c in range(8)]
    assert len(set(assignments)) == 8
    purity = np.mean([
        np.bincount(km.labels_[data.labels == c]).max() / 200.0
        for c in range(8)])
    assert purity > 0.99


# -- training -------------------------------------------------------------------

def test_train_bit_identical_for_same_config():
    data = generate_blobs(4, 40, 2, 0.2, seed=9)
    runs = [train(toy_model(seed=1, classes=4), data,
                  toy_config(seed=1, epochs=8)) for _ in range(2)]
    assert np.array_equal(runs[0].losses, runs[1].losses)
    assert np.array_equal(runs[0].accuracies, runs[1].accuracies)
    for w0, w1 in zip(runs[0].model.layers, runs[1].model.layers):
        assert np.array_equal(w0, w1)
    assert np.array_equal(runs[0].model.class_weights.matrix,
                          runs[1].model.class_weights.matrix)


def test_train_does_not_mutate_input_model():
    data = generate_blobs(4, 30, 2, 0.2, seed=2)
    model = toy_model(seed=3, classes=4)
    before = [w.copy() for w in model.layers]
    train(model, data, toy_config(seed=3, epochs=3))
    for w, b in zip(model.layers, before):
        assert np.array_equal(w, b)


def test_lmcl_zero_margin_matches_nsl_trace():
    data = generate_blobs(4, 40, 2, 0.2, seed=4)
    run_m0 = train(toy_model(seed=5, classes=4), data,
                   toy_config(m=0.0, seed=5, epochs=10))
    cfg_nsl = TrainConfig(spec=LossSpec.nsl(30.0), epochs=10, batch_size=64,
                          learning_rate=0.1, lr_drop_epochs=(40, 50),
                          weight_decay=5e-4, seed=5)
    run_nsl = train(toy_model(seed=5, classes=4), data, cfg_nsl)
    assert np.max(np.abs(run_m0.losses - run_nsl.losses)) <= 1e-12


def test_toy_run_converges_to_high_accuracy():
    data = generate_blobs(8, 200, 2, 0.2, seed=1000)
    run = train(toy_model(seed=0), data, toy_config(seed=0))
    assert run.converged
    assert run.accuracies[-1] >= 0.99


def test_loss_trace_non_increasing_over_windows():
    data = generate_blobs(8, 200, 2, 0.2, seed=1001)
    run = train(toy_model(seed=1), data, toy_config(seed=1))
    window = 5
    means = [run.losses[i:i + window].mean()
             for i in range(0, len(run.losses) - window + 1, window)]
    assert all(a >= b - 1e-9 for a, b in zip(means, means[1:]))


def test_oversized_margin_fails_to_converge():
    # m = 0.9 far above the planar 8-class bound (~0.29)
    data = generate_blobs(8, 100, 2, 0.2, seed=1002)
    cfg = TrainConfig(spec=LossSpec.lmcl(30.0, 0.9), epochs=30,
                      batch_size=64, learning_rate=0.1,
                      lr_drop_epochs=(20,), weight_decay=5e-4, seed=2)
    try:
        run = train(toy_model(seed=2), data, cfg)
    except TrainingDivergedError:
        return
    assert (not run.converged) or run.losses[-1] > 0.9 * run.losses[0]


def test_divergent_lr_raises_with_epoch():
    data = generate_blobs(4, 40, 2, 0.2, seed=6)
    cfg = TrainConfig(spec=LossSpec.softmax(), epochs=20, batch_size=16,
                      learning_rate=1e9, lr_drop_epochs=(),
                      weight_decay=0.0, seed=0)
    with pytest.raises(TrainingDivergedError) as info:
        train(toy_model(seed=0, classes=4), data, cfg)
    assert 0 <= info.value.epoch < 20


def test_training_loss_invariant_to_input_rescaling():
    # positively homogeneous network + normalized loss: scaling every input
    # by a positive constant must leave the whole trace unchanged
    data = generate_blobs(4, 40, 2, 0.2, seed=7)
    scaled = type(data)(data.samples * 37.5, data.labels, data.num_classes)
    run_a = train(toy_model(seed=8, classes=4), data,
                  toy_config(seed=8, epochs=5, weight_decay=0.0))
    run_b = train(toy_model(seed=8, classes=4), scaled,
                  toy_config(seed=8, epochs=5, weight_decay=0.0))
    assert np.max(np.abs(run_a.losses - run_b.losses)) < 1e-9


def test_shape_mismatch_between_model_and_data():
    data = generate_blobs(4, 10, 2, 0.2, seed=0)
    with pytest.raises(ShapeError):
        train(toy_model(seed=0, classes=5), data, toy_config(seed=0, epochs=1))


# -- feature extraction -----------------------------------------------------------

def test_extract_features_identity_single_layer():
    model = MlpModel([np.eye(2)], ClassWeights(np.eye(2)))
    x = np.array([[1.5, -2.0], [0.0, 3.0]])
    assert np.array_equal(extract_features(model, x), x)


def test_extract_features_deterministic():
    model = toy_model(seed=11)
    x = np.random.default_rng(0).normal(size=(10, 2))
    assert np.array_equal(extract_features(model, x),
                          extract_features(model, x))


def test_trained_features_align_with_class_weights():
    data = generate_blobs(8, 200, 2, 0.2, seed=1003)
    run = train(toy_model(seed=3), data, toy_config(seed=3))
    feats = extract_features(run.model, data.samples)
    w = run.model.class_weights.matrix
    w = w / np.linalg.norm(w, axis=0)
    for c in range(8):
        mean = feats[data.labels == c].mean(axis=0)
        cos = mean @ w[:, c] / np.linalg.norm(mean)
        assert cos >= 0.9


# -- angular statistics -------------------------------------------------------------

def test_angular_stats_zero_intra_when_features_on_weights():
    w = simplex_weights(4, 3)
    feats = np.repeat(w.matrix.T, 3, axis=0)
    labels = np.repeat(np.arange(4), 3)
    stats = angular_stats(feats, labels, ClassWeights(w.matrix))
    assert np.allclose(stats.intra_spread, 0.0, atol=1e-7)


def test_angular_stats_antipodal_classes_gap_pi():
    feats = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.0], [-1.0, 0.0]])
    labels = np.array([0, 0, 1, 1])
    weights = ClassWeights(np.array([[1.0, -1.0], [0.0, 0.0]]))
    stats = angular_stats(feats, labels, weights)
    assert stats.min_inter_gap == pytest.approx(np.pi, abs=1e-7)


def test_angular_stats_rejects_zero_features():
    weights = ClassWeights(np.eye(2))
    with pytest.raises(DegenerateVectorError):
        angular_stats(np.array([[0.0, 0.0]]), [0], weights)


# -- serialization --------------------------------------------------------------------

def test_model_roundtrip_bitwise(tmp_path):
    model = toy_model(seed=13)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    for a, b in zip(model.layers, loaded.layers):
        assert np.array_equal(a, b)
    assert np.array_equal(model.class_weights.matrix,
                          loaded.class_weights.matrix)
    # rewriting produces identical bytes
    again = tmp_path / "model2.json"
    save_model(loaded, again)
    assert path.read_bytes() == again.read_bytes()


def test_load_model_rejects_wrong_magic(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else", "version": 1}')
    from marginlab import MarginlabError
    with pytest.raises(MarginlabError):
        load_model(path)
