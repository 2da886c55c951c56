import numpy as np
import pytest

from kernelbandits.mlp import (
    MLPParams,
    backward,
    flatten_params,
    forward_cached,
    init_mlp,
    mlp_forward,
    softplus,
    unflatten_params,
)


def reference_forward(params, x):
    """Oracle: straight-line re-evaluation of the forward recurrence."""
    h = np.asarray(x, dtype=float)
    n_layers = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = w @ h + b
        if i != n_layers - 1:
            h = np.log1p(np.exp(h))
    return h


def test_zero_params_output_zero():
    params = MLPParams(
        weights=[np.zeros((3, 2)), np.zeros((2, 3))],
        biases=[np.zeros(3), np.zeros(2)],
    )
    out = mlp_forward(params, np.array([1.0, -2.0]))
    np.testing.assert_array_equal(out, np.zeros(2))


def test_single_linear_layer_identity():
    params = MLPParams(weights=[np.eye(3)], biases=[np.zeros(3)])
    x = np.array([0.5, -1.0, 2.0])
    np.testing.assert_array_equal(mlp_forward(params, x), x)


def test_forward_matches_reference_oracle():
    rng = np.random.default_rng(0)
    params = init_mlp([4, 6, 3], rng)
    for _ in range(10):
        x = rng.normal(size=4)
        np.testing.assert_allclose(mlp_forward(params, x),
                                   reference_forward(params, x), rtol=1e-12)


def test_batch_forward_matches_single():
    rng = np.random.default_rng(1)
    params = init_mlp([3, 5, 2], rng)
    xs = rng.normal(size=(6, 3))
    batch = mlp_forward(params, xs)
    for i, x in enumerate(xs):
        np.testing.assert_allclose(batch[i], mlp_forward(params, x), rtol=1e-12)


def test_dimension_mismatch():
    rng = np.random.default_rng(2)
    params = init_mlp([3, 2], rng)
    with pytest.raises(ValueError):
        mlp_forward(params, np.zeros(4))


def test_softplus_stable_and_positive():
    x = np.array([-50.0, -5.0, 0.0, 5.0, 50.0])
    y = softplus(x)
    assert np.all(np.isfinite(y))
    assert np.all(y > 0.0)
    assert y[2] == pytest.approx(np.log(2.0), rel=1e-12)
    assert y[4] == pytest.approx(50.0, rel=1e-12)


def test_forward_finite_for_large_inputs():
    rng = np.random.default_rng(3)
    params = init_mlp([2, 8, 2], rng)
    out = mlp_forward(params, np.array([[50.0, -50.0], [-50.0, 50.0]]))
    assert np.all(np.isfinite(out))


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(4)
    params = init_mlp([3, 5, 2], rng)
    x = rng.normal(size=(4, 3))
    target = rng.normal(size=(4, 2))

    def scalar_loss(p):
        out, _ = forward_cached(p, x)
        return 0.5 * np.sum((out - target) ** 2)

    out, cache = forward_cached(params, x)
    grads = backward(params, cache, out - target)
    flat_g = flatten_params(grads)
    theta = flatten_params(params)
    fd = np.empty_like(theta)
    h = 1e-6
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        fd[i] = (scalar_loss(unflatten_params(up, params))
                 - scalar_loss(unflatten_params(down, params))) / (2 * h)
    np.testing.assert_allclose(flat_g, fd, rtol=1e-5, atol=1e-8)


def test_init_is_seeded():
    a = init_mlp([3, 4, 2], np.random.default_rng(7))
    b = init_mlp([3, 4, 2], np.random.default_rng(7))
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)


def test_flatten_roundtrip():
    params = init_mlp([2, 3, 1], np.random.default_rng(8))
    rebuilt = unflatten_params(flatten_params(params), params)
    for wa, wb in zip(params.weights, rebuilt.weights):
        np.testing.assert_array_equal(wa, wb)
    for ba, bb in zip(params.biases, rebuilt.biases):
        np.testing.assert_array_equal(ba, bb)
