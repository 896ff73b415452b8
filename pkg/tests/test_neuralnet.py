import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nslids.errors import DimensionError
from nslids.neuralnet import (
    Activation,
    DenseLayer,
    LossKind,
    Network,
    init_parameters,
    satlin,
    softmax,
)


def finite_difference(net, X, T, h=1e-6):
    theta = net.get_params()
    out = np.empty_like(theta)
    probe = net.copy()
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        probe.set_params(theta + step)
        up = probe.loss(X, T)
        probe.set_params(theta - step)
        down = probe.loss(X, T)
        out[i] = (up - down) / (2 * h)
    return out


def assert_gradient_matches(net, X, T):
    analytic = net.gradient(X, T)
    numeric = finite_difference(net, X, T)
    err = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic) + np.linalg.norm(numeric), 1e-12)
    assert err < 1e-5, err


def away_from_kinks(net, X, margin=1e-3):
    """True if no satlin pre-activation sits within ``margin`` of 0 or 1."""
    zs, _ = net._forward(X)
    for z, layer in zip(zs, net.layers):
        if layer.activation is Activation.SATLIN:
            if np.any(np.abs(z) < margin) or np.any(np.abs(z - 1) < margin):
                return False
    return True


def random_onehot(rng, n, k):
    T = np.zeros((n, k))
    T[np.arange(n), rng.integers(0, k, n)] = 1
    return T


class TestForward:
    def test_identity_layer(self):
        net = Network([DenseLayer(np.eye(2), np.zeros(2), "linear")], "mse")
        assert net.output(np.array([1.0, 2.0])).tolist() == [1.0, 2.0]

    def test_satlin_values(self):
        assert satlin(np.array([-0.5, 0.5, 1.5])).tolist() == [0.0, 0.5, 1.0]

    def test_softmax_of_zeros(self):
        net = Network([DenseLayer(np.zeros((3, 4)), np.zeros(4), "softmax")], LossKind.CROSS_ENTROPY)
        np.testing.assert_allclose(net.output(np.ones(3)), [0.25] * 4)

    def test_per_layer_outputs(self):
        net = Network([DenseLayer.create(3, 2, "satlin", np.random.default_rng(0)),
                       DenseLayer.create(2, 3, "linear", np.random.default_rng(1))], "mse")
        outs = net.forward(np.ones((5, 3)))
        assert [o.shape for o in outs] == [(5, 2), (5, 3)]

    def test_dimension_mismatch(self):
        net = Network([DenseLayer(np.eye(2), np.zeros(2), "linear")], "mse")
        with pytest.raises(DimensionError):
            net.output(np.ones(3))

    def test_bad_chain(self):
        with pytest.raises(DimensionError):
            Network([DenseLayer(np.eye(2), np.zeros(2), "linear"),
                     DenseLayer(np.eye(3), np.zeros(3), "linear")], "mse")

    def test_softmax_only_last(self):
        with pytest.raises(DimensionError):
            Network([DenseLayer(np.eye(2), np.zeros(2), "softmax"),
                     DenseLayer(np.eye(2), np.zeros(2), "linear")], "mse")

    def test_cross_entropy_requires_softmax(self):
        with pytest.raises(DimensionError):
            Network([DenseLayer(np.eye(2), np.zeros(2), "linear")], LossKind.CROSS_ENTROPY)

    def test_tied_layer_uses_transpose(self):
        W = np.arange(6.0).reshape(2, 3)
        net = Network([DenseLayer(W, np.zeros(3), "linear"),
                       DenseLayer(None, np.zeros(2), "linear", tied_to=0)], "mse")
        np.testing.assert_array_equal(net.weight(1), W.T)
        assert net.n_params == 6 + 3 + 2


class TestLoss:
    def test_mse_example(self):
        net = Network([DenseLayer(np.eye(2), np.zeros(2), "linear")], "mse")
        assert net.loss(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]])) == pytest.approx(0.5)

    def test_cross_entropy_perfect(self):
        W = np.array([[50.0, -50.0]])
        net = Network([DenseLayer(W, np.zeros(2), "softmax")], LossKind.CROSS_ENTROPY)
        assert net.loss(np.array([[1.0]]), np.array([[1.0, 0.0]])) == pytest.approx(0.0, abs=1e-12)

    def test_cross_entropy_floor(self):
        W = np.array([[1e4, -1e4]])
        net = Network([DenseLayer(W, np.zeros(2), "softmax")], LossKind.CROSS_ENTROPY)
        loss = net.loss(np.array([[1.0]]), np.array([[0.0, 1.0]]))
        assert np.isfinite(loss)
        assert loss == pytest.approx(-np.log(1e-12))

    def test_non_onehot_targets(self):
        net = Network([DenseLayer(np.zeros((2, 2)), np.zeros(2), "softmax")], LossKind.CROSS_ENTROPY)
        with pytest.raises(DimensionError):
            net.loss(np.ones((1, 2)), np.array([[0.5, 0.5]]))

    def test_target_shape(self):
        net = Network([DenseLayer(np.eye(2), np.zeros(2), "linear")], "mse")
        with pytest.raises(DimensionError):
            net.loss(np.ones((3, 2)), np.ones((2, 2)))


class TestGradient:
    @pytest.mark.parametrize("seed", range(4))
    def test_mse_two_layer(self, seed):
        rng = np.random.default_rng(seed)
        net = Network([DenseLayer.create(5, 4, "satlin", rng), DenseLayer.create(4, 3, "linear", rng)], "mse")
        net.layers[0].bias[:] = rng.uniform(0.2, 0.5, 4)
        X = rng.uniform(0, 1, (7, 5))
        T = rng.uniform(0, 1, (7, 3))
        assert away_from_kinks(net, X)
        assert_gradient_matches(net, X, T)

    @pytest.mark.parametrize("seed", range(3))
    def test_tied_autoencoder(self, seed):
        rng = np.random.default_rng(10 + seed)
        W = rng.uniform(-0.4, 0.4, (6, 3))
        net = Network([DenseLayer(W, rng.uniform(0.3, 0.6, 3), "satlin"),
                       DenseLayer(None, rng.normal(0, 0.1, 6), "linear", tied_to=0)], "mse")
        X = rng.uniform(0, 1, (9, 6))
        assert away_from_kinks(net, X)
        assert_gradient_matches(net, X, X)

    @pytest.mark.parametrize("seed", range(3))
    def test_softmax_cross_entropy(self, seed):
        rng = np.random.default_rng(20 + seed)
        net = Network([DenseLayer.create(4, 5, "satlin", rng), DenseLayer.create(5, 3, "softmax", rng)],
                      LossKind.CROSS_ENTROPY)
        net.layers[0].bias[:] = rng.uniform(0.2, 0.5, 5)
        X = rng.uniform(0, 1, (8, 4))
        assert away_from_kinks(net, X)
        assert_gradient_matches(net, X, random_onehot(rng, 8, 3))

    def test_stacked_encoder_with_head(self):
        rng = np.random.default_rng(5)
        net = Network([DenseLayer.create(6, 4, "satlin", rng), DenseLayer.create(4, 3, "satlin", rng),
                       DenseLayer.create(3, 4, "softmax", rng)], LossKind.CROSS_ENTROPY)
        for layer in net.layers[:2]:
            layer.bias[:] = rng.uniform(0.3, 0.5, layer.bias.size)
        X = rng.uniform(0, 1, (6, 6))
        assert away_from_kinks(net, X)
        assert_gradient_matches(net, X, random_onehot(rng, 6, 4))

    def test_softmax_cross_entropy_output_delta(self):
        rng = np.random.default_rng(3)
        W = rng.normal(size=(3, 4))
        net = Network([DenseLayer(W, np.zeros(4), "softmax")], LossKind.CROSS_ENTROPY)
        x = rng.normal(size=(1, 3))
        t = np.array([[0.0, 0.0, 1.0, 0.0]])
        o = net.output(x)
        grad = net.gradient(x, t)
        # with a single sample the bias gradient is exactly the output delta
        np.testing.assert_allclose(grad[-4:], (o - t)[0], atol=1e-12)

    def test_objective_matches_gradient(self):
        rng = np.random.default_rng(8)
        net = Network([DenseLayer.create(3, 2, "satlin", rng), DenseLayer.create(2, 3, "linear", rng)], "mse")
        X = rng.uniform(size=(4, 3))
        fun, grad = net.objective(X, X)
        theta = net.get_params() + 0.01
        probe = net.copy()
        probe.set_params(theta)
        assert fun(theta) == probe.loss(X, X)
        np.testing.assert_array_equal(grad(theta), probe.gradient(X, X))
        np.testing.assert_array_equal(grad(theta - 0.02), (probe.set_params(theta - 0.02), probe.gradient(X, X))[1])


class TestParameters:
    def test_init_deterministic(self):
        a = init_parameters([5, 4, 3], seed=7)
        b = init_parameters([5, 4, 3], seed=7)
        np.testing.assert_array_equal(a, b)
        assert a.size == 5 * 4 + 4 + 4 * 3 + 3
        # biases start at zero
        assert np.all(a[20:24] == 0) and np.all(a[-3:] == 0)
        assert not np.array_equal(a, init_parameters([5, 4, 3], seed=8))

    def test_flat_order(self):
        net = Network([DenseLayer(np.arange(6.0).reshape(2, 3), np.array([10.0, 11, 12]), "linear")], "mse")
        assert net.get_params().tolist() == [0, 1, 2, 3, 4, 5, 10, 11, 12]

    def test_set_get_round_trip(self):
        rng = np.random.default_rng(0)
        net = Network([DenseLayer.create(4, 2, "satlin", rng),
                       DenseLayer(None, np.zeros(4), "linear", tied_to=0)], "mse")
        theta = rng.normal(size=net.n_params)
        net.set_params(theta)
        np.testing.assert_array_equal(net.get_params(), theta)
        with pytest.raises(DimensionError):
            net.set_params(theta[:-1])


@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 6)),
              elements=st.floats(-1e3, 1e3)))
def test_softmax_rows_sum_to_one(z):
    out = softmax(z)
    assert np.all(out >= 0)
    np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-9)


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(-1e6, 1e6)))
def test_satlin_range(z):
    a = satlin(z)
    assert np.all((a >= 0) & (a <= 1))


@given(st.integers(0, 2**31 - 1))
def test_forward_deterministic(seed):
    rng = np.random.default_rng(seed)
    net = Network([DenseLayer.create(4, 3, "satlin", rng), DenseLayer.create(3, 2, "softmax", rng)],
                  LossKind.CROSS_ENTROPY)
    x = rng.uniform(size=(3, 4))
    np.testing.assert_array_equal(net.output(x), net.copy().output(x))
