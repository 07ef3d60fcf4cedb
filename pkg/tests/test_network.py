import math
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rffnet.errors import DataError, ParameterError, ShapeError
from rffnet.network import (
    Network,
    accuracy,
    backward_full,
    build_network,
    compute_loss,
    default_layer_count,
    forward_full,
    gradient_list,
    load_network,
    parameters,
    predict,
    predict_from_logits,
    save_network,
)
from rffnet.numerics import Rng


def relative_error(a, b, floor=1e-8):
    return abs(a - b) / max(abs(a), abs(b), floor)


def test_default_layer_count():
    assert default_layer_count(124) == 2
    assert default_layer_count(500) == 2
    assert default_layer_count(1001) == 3
    assert default_layer_count(1000) == 2
    assert default_layer_count(14980) == 16


def test_build_network_shapes():
    net = build_network(6, 2, 2, [64, 64], "squared_hinge", Rng(0))
    assert net.readout_w.shape == (2, 128)
    assert net.readout_b.shape == (2,)
    assert net.layers[0].omega.shape == (64, 6)
    assert net.layers[1].omega.shape == (64, 128)


def test_build_single_layer():
    net = build_network(3, 2, 1, [8], "squared", Rng(0))
    assert len(net.layers) == 1
    assert net.readout_w.shape == (2, 16)


def test_build_rejects_mismatched_dims():
    with pytest.raises(ParameterError):
        build_network(3, 2, 2, [8], "squared", Rng(0))


def test_build_rejects_unknown_loss():
    with pytest.raises(ParameterError):
        build_network(3, 2, 1, [8], "absolute", Rng(0))


def test_forward_zero_input_single_layer():
    net = build_network(4, 2, 1, [8], "squared", Rng(3))
    trace = forward_full(net, np.zeros((2, 4)))
    scale = np.sqrt(1.0 / 8)
    feats = np.concatenate([np.full(8, scale), np.zeros(8)])
    expected = net.readout_w @ feats + net.readout_b
    assert np.abs(trace.logits - expected).max() < 1e-12


def test_trace_length_equals_layer_count():
    net = build_network(3, 2, 3, [4, 5, 6], "squared", Rng(1))
    trace = forward_full(net, Rng(2).normal((7, 3)))
    assert len(trace.caches) == 3
    assert trace.logits.shape == (7, 2)


def test_logits_finite_over_many_random_networks():
    for i in range(1000):
        rng = Rng(i)
        d = 1 + i % 5
        net = build_network(d, 2 + i % 3, 1 + i % 3, [2 + i % 4] * (1 + i % 3),
                            "cross_entropy", rng, batch_norm=bool(i % 2))
        X = rng.derive("x").normal((3, d), 0.0, 5.0)
        trace = forward_full(net, X, training=True)
        assert np.all(np.isfinite(trace.logits))


def test_squared_loss_at_minimum():
    net = build_network(3, 2, 1, [4], "squared", Rng(0))
    logits = np.array([[1.0, 0.0], [0.0, 1.0]])
    report, grad = compute_loss(net, logits, np.array([0, 1]), 0.0)
    assert report.data_loss == 0.0
    assert np.array_equal(grad, np.zeros((2, 2)))
    assert report.correct_count == 2


def test_squared_hinge_margin_values():
    # one-column readout, margin labels: score 2 with y=+1 -> loss 0; score 0 -> loss 1
    net = Network(layers=build_network(2, 2, 1, [4], "squared_hinge", Rng(0)).layers,
                  readout_w=np.zeros((1, 8)), readout_b=np.zeros(1),
                  loss_kind="squared_hinge", class_count=2)
    report, _ = compute_loss(net, np.array([[2.0]]), np.array([1]), 0.0)
    assert report.data_loss == 0.0
    report, grad = compute_loss(net, np.array([[0.0]]), np.array([1]), 0.0)
    assert report.data_loss == 1.0
    assert abs(grad[0, 0] + 2.0) < 1e-15


def test_cross_entropy_uniform_logits():
    net = build_network(3, 2, 1, [4], "cross_entropy", Rng(0))
    report, _ = compute_loss(net, np.zeros((4, 2)), np.array([0, 1, 0, 1]), 0.0)
    assert abs(report.data_loss - math.log(2.0)) < 1e-12


def test_loss_rejects_bad_labels():
    net = build_network(3, 2, 1, [4], "squared", Rng(0))
    with pytest.raises(DataError):
        compute_loss(net, np.zeros((2, 2)), np.array([0, 2]), 0.0)


def test_reg_loss_matches_brute_force_flatten():
    net = build_network(3, 3, 2, [4, 5], "cross_entropy", Rng(7), batch_norm=True)
    lam = 0.37
    report, _ = compute_loss(net, np.zeros((2, 3)), np.array([0, 1]), lam)
    theta = np.concatenate([p.reshape(-1) for p in parameters(net)])
    assert abs(report.reg_loss - 0.5 * lam * float(theta @ theta)) < 1e-12
    assert report.total == report.data_loss + report.reg_loss


def test_backward_zero_grad_zero_lambda():
    net = build_network(3, 2, 2, [4, 4], "squared", Rng(1), batch_norm=True)
    X = Rng(2).normal((5, 3))
    trace = forward_full(net, X, training=True)
    grads = backward_full(net, trace, np.zeros_like(trace.logits), 0.0)
    for g in gradient_list(net, grads):
        assert np.abs(g).max() == 0.0


def test_backward_pure_regularizer():
    net = build_network(3, 2, 2, [4, 4], "squared", Rng(1), batch_norm=True)
    lam = 0.25
    X = Rng(2).normal((5, 3))
    trace = forward_full(net, X, training=True)
    grads = backward_full(net, trace, np.zeros_like(trace.logits), lam)
    for p, g in zip(parameters(net), gradient_list(net, grads)):
        assert np.abs(g - lam * p).max() < 1e-14


def _objective(net, X, y, lam):
    trace = forward_full(net, X, training=True)
    report, _ = compute_loss(net, trace.logits, y, lam)
    return report.total


@pytest.mark.parametrize("loss_kind", ["squared", "squared_hinge", "cross_entropy"])
@pytest.mark.parametrize("bn", [False, True])
def test_full_network_gradient_check(loss_kind, bn):
    rng = Rng(["squared", "squared_hinge", "cross_entropy"].index(loss_kind) * 2 + int(bn))
    net = build_network(3, 2, 2, [4, 4], loss_kind, rng, batch_norm=bn)
    X = rng.derive("x").normal((5, 3))
    y = np.array([0, 1, 1, 0, 1])
    lam = 1e-3
    trace = forward_full(net, X, training=True)
    _, grad_logits = compute_loss(net, trace.logits, y, lam)
    grads = backward_full(net, trace, grad_logits, lam)
    h = 1e-6
    for p, g in zip(parameters(net), gradient_list(net, grads)):
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = _objective(net, X, y, lam)
            flat[i] = orig - h
            lm = _objective(net, X, y, lam)
            flat[i] = orig
            assert relative_error((lp - lm) / (2 * h), gflat[i]) < 1e-5


def test_predict_basic_and_tie_break():
    assert predict_from_logits(np.array([[0.9, 0.1]]))[0] == 0
    assert predict_from_logits(np.array([[0.5, 0.5]]))[0] == 0
    assert predict_from_logits(np.array([[0.1, 0.9]]))[0] == 1
    # margin mode on a single score column: sign rule, ties to class 0
    assert predict_from_logits(np.array([[0.4]]))[0] == 1
    assert predict_from_logits(np.array([[0.0]]))[0] == 0
    assert predict_from_logits(np.array([[-0.2]]))[0] == 0


@given(st.integers(0, 1000))
@settings(max_examples=30, deadline=None)
def test_predict_invariant_to_logit_shift(seed):
    rng = Rng(seed)
    logits = rng.normal((6, 3))
    shifts = rng.derive("c").normal((6, 1), 0.0, 10.0)
    assert np.array_equal(predict_from_logits(logits), predict_from_logits(logits + shifts))


def test_untrained_network_is_chance_level():
    rng = Rng(123)
    net = build_network(4, 2, 1, [16], "squared_hinge", rng)
    n = 20_000
    X = rng.derive("x").normal((n, 4))
    y = (rng.derive("y").uniform(n) < 0.5).astype(np.int64)
    acc = accuracy(net, X, y)
    assert abs(acc - 0.5) < 0.05


def test_objective_decreases_on_separable_toy(tmp_path):
    from rffnet.optimizer import TrainConfig, fit
    from rffnet.tasks import two_blobs

    successes = 0
    for seed in range(20):
        data = two_blobs(100, seed=seed, separation=6.0)
        net = build_network(2, 2, 1, [8], "squared_hinge", Rng(seed).derive("init"))
        log = fit(net, data.X, data.y, TrainConfig(epochs=10, batch_size=None, seed=seed, shuffle=False))
        losses = [r.loss for r in log.records]
        if losses[-1] < losses[0]:
            successes += 1
    assert successes >= 19


def test_serialization_roundtrip_bit_exact(tmp_path):
    net = build_network(5, 3, 2, [4, 6], "cross_entropy", Rng(11), batch_norm=True)
    stages = [(Rng(1).normal(5), np.abs(Rng(2).normal(5)) + 0.5)]
    path = tmp_path / "model.bin"
    save_network(net, path, preprocess=stages, label_names=["a", "b", "c"])
    loaded, loaded_stages, names = load_network(path)
    assert names == ["a", "b", "c"]
    assert loaded.loss_kind == net.loss_kind
    assert loaded.class_count == net.class_count
    for p, q in zip(parameters(net), parameters(loaded)):
        assert np.array_equal(p, q)
    for layer, ll in zip(net.layers, loaded.layers):
        assert np.array_equal(layer.batchnorm.running_mean, ll.batchnorm.running_mean)
        assert np.array_equal(layer.batchnorm.running_var, ll.batchnorm.running_var)
        assert layer.batchnorm.momentum == ll.batchnorm.momentum
    for (s, d), (s2, d2) in zip(stages, loaded_stages):
        assert np.array_equal(s, s2)
        assert np.array_equal(d, d2)
    X = Rng(3).normal((4, 5))
    assert np.array_equal(predict(net, X), predict(loaded, X))


def test_serialization_deterministic_bytes(tmp_path):
    net = build_network(3, 2, 1, [4], "squared", Rng(5))
    p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
    save_network(net, p1)
    save_network(net, p2)
    assert p1.read_bytes() == p2.read_bytes()
