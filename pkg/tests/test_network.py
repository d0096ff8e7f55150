"""Forward pass, loss, backprop exactness, and model file round-trips."""

import math

import numpy as np
import pytest

from exoticnet.core import Prng
from exoticnet.errors import ShapeError
from exoticnet.network import (
    Architecture,
    Network,
    backward,
    ce_loss,
    forward,
    init_network,
    load_network,
    predict_scores,
    save_network,
)

import oracles


def small_net(widths, seed=0, hidden_activation="sigmoid"):
    return init_network(Architecture(tuple(widths)), Prng(seed), hidden_activation)


def max_grad_error(net, x, y, weights=None):
    """Worst relative disagreement between backprop and five-point central
    differences, with a 1e-9 absolute floor for near-zero components."""
    grads = backward(net, forward(net, x), y, weights)
    worst = 0.0
    for l in range(net.n_layers):
        for param, grad in (
            (net.weights[l], grads.weights[l]),
            (net.biases[l], grads.biases[l]),
        ):
            it = np.nditer(param, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                fd = oracles.fd_gradient_5point(
                    param, idx, lambda: ce_loss(forward(net, x).outputs, y, weights)
                )
                bp = grad[idx]
                err = abs(fd - bp) / max(abs(fd), abs(bp), 1e-9 / 1e-6)
                worst = max(worst, err)
    return worst


class TestArchitectureAndInit:
    def test_default_shapes(self):
        net = init_network(Architecture(), Prng(1))
        assert [w.shape for w in net.weights] == [
            (300, 30), (300, 300), (300, 300), (300, 300), (1, 300),
        ]

    def test_biases_start_at_zero(self):
        net = init_network(Architecture((4, 7, 1)), Prng(2))
        for b in net.biases:
            assert np.array_equal(b, np.zeros_like(b))

    def test_first_layer_variance(self):
        net = init_network(Architecture(), Prng(3))
        assert abs(net.weights[0].var() - 0.1) < 0.01

    def test_layer_variance_profile(self):
        net = init_network(Architecture((50, 200, 200, 200, 1)), Prng(4))
        assert abs(net.weights[1].var() - 0.05) < 0.005
        assert abs(net.weights[2].var() - 0.05) < 0.005

    def test_invalid_architectures_rejected(self):
        with pytest.raises(ValueError):
            Architecture((30,))
        with pytest.raises(ValueError):
            Architecture((30, 0, 1))
        with pytest.raises(ValueError):
            Architecture((30, 10, 2))


class TestForward:
    def test_zero_parameters_give_half_everywhere(self):
        net = small_net((3, 4, 4, 1))
        for w in net.weights:
            w[:] = 0.0
        trace = forward(net, np.ones((5, 3)))
        for a in trace.activations[1:]:
            assert np.array_equal(a, np.full_like(a, 0.5))

    def test_single_unit_hand_case(self):
        net = Network([np.array([[2.0]])], [np.array([-2.0])], ["sigmoid"])
        trace = forward(net, np.array([[1.0]]))
        assert trace.outputs[0] == 0.5

    def test_matches_scalar_loop_reference(self):
        rng = np.random.default_rng(6)
        net = small_net((4, 6, 5, 1), seed=5)
        x = rng.standard_normal((8, 4))
        expected = oracles.forward_scalar(net.weights, net.biases, net.activations, x)
        np.testing.assert_allclose(forward(net, x).outputs, expected, atol=1e-12, rtol=0)

    def test_tanh_variant_matches_scalar_loop(self):
        rng = np.random.default_rng(7)
        net = small_net((3, 5, 1), seed=8, hidden_activation="tanh")
        x = rng.standard_normal((6, 3))
        expected = oracles.forward_scalar(net.weights, net.biases, net.activations, x)
        np.testing.assert_allclose(forward(net, x).outputs, expected, atol=1e-12, rtol=0)

    def test_deterministic_and_pure(self):
        net = small_net((4, 5, 1), seed=9)
        x = np.random.default_rng(8).standard_normal((7, 4))
        t1, t2 = forward(net, x), forward(net, x)
        for a1, a2 in zip(t1.activations, t2.activations):
            assert np.array_equal(a1, a2)

    def test_shape_mismatch(self):
        net = small_net((4, 5, 1))
        with pytest.raises(ShapeError):
            forward(net, np.zeros((3, 7)))

    def test_predict_scores_matches_forward(self):
        net = small_net((5, 8, 1), seed=10)
        x = np.random.default_rng(9).standard_normal((100, 5))
        assert np.array_equal(predict_scores(net, x, chunk=16), forward(net, x).outputs)


class TestLoss:
    def test_half_output_unit_target(self):
        assert ce_loss([0.5], [1.0]) == pytest.approx(math.log(2.0), abs=1e-12)

    def test_perfect_prediction_near_zero(self):
        assert ce_loss([1.0, 0.0], [1.0, 0.0]) <= 1e-11

    def test_weighted_two_row_hand_case(self):
        a, y, w = [0.8, 0.3], [1.0, 0.0], [2.0, 1.0]
        manual = (2.0 * -math.log(0.8) + 1.0 * -math.log(0.7)) / 3.0
        assert ce_loss(a, y, w) == pytest.approx(manual, abs=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            ce_loss([0.5, 0.5], [1.0])


class TestBackward:
    def test_single_unit_hand_gradients(self):
        net = Network([np.array([[0.0]])], [np.array([0.0])], ["sigmoid"])
        x, y = np.array([[2.0]]), np.array([1.0])
        grads = backward(net, forward(net, x), y)
        assert grads.weights[0][0, 0] == pytest.approx(-1.0, abs=1e-12)
        assert grads.biases[0][0] == pytest.approx(-0.5, abs=1e-12)

    def test_zero_input_batch_zeroes_first_layer_weight_grad(self):
        net = small_net((4, 5, 1), seed=11)
        y = np.array([1.0, 0.0, 1.0])
        grads = backward(net, forward(net, np.zeros((3, 4))), y)
        assert np.array_equal(grads.weights[0], np.zeros_like(grads.weights[0]))

    def test_gradcheck_random_net(self):
        rng = np.random.default_rng(12)
        net = small_net((4, 5, 3, 1), seed=13)
        x = rng.standard_normal((6, 4))
        y = (rng.random(6) < 0.5).astype(float)
        assert max_grad_error(net, x, y) < 1e-6

    def test_gradcheck_weighted_loss(self):
        rng = np.random.default_rng(13)
        net = small_net((3, 4, 1), seed=14)
        x = rng.standard_normal((5, 3))
        y = (rng.random(5) < 0.5).astype(float)
        w = rng.uniform(0.5, 3.0, 5)
        assert max_grad_error(net, x, y, w) < 1e-6

    def test_gradcheck_tanh_variant(self):
        rng = np.random.default_rng(14)
        net = small_net((4, 6, 4, 1), seed=15, hidden_activation="tanh")
        x = rng.standard_normal((5, 4))
        y = (rng.random(5) < 0.5).astype(float)
        assert max_grad_error(net, x, y) < 1e-6

    def test_gradcheck_linear_variant(self):
        rng = np.random.default_rng(15)
        net = small_net((3, 5, 1), seed=16, hidden_activation="linear")
        x = rng.standard_normal((4, 3))
        y = np.array([1.0, 0.0, 0.0, 1.0])
        assert max_grad_error(net, x, y) < 1e-6

    def test_tiny_step_reduces_loss(self):
        rng = np.random.default_rng(16)
        net = small_net((4, 8, 1), seed=17)
        x = rng.standard_normal((10, 4))
        y = (rng.random(10) < 0.5).astype(float)
        before = ce_loss(forward(net, x).outputs, y)
        grads = backward(net, forward(net, x), y)
        for l in range(net.n_layers):
            net.weights[l] -= 1e-3 * grads.weights[l]
            net.biases[l] -= 1e-3 * grads.biases[l]
        after = ce_loss(forward(net, x).outputs, y)
        assert after < before


class TestModelFile:
    def test_save_load_bit_exact(self, tmp_path):
        net = small_net((6, 9, 4, 1), seed=18)
        path = tmp_path / "model.txt"
        save_network(net, path)
        loaded = load_network(path)
        assert loaded.activations == net.activations
        assert loaded.widths == net.widths
        for a, b in zip(net.weights + net.biases, loaded.weights + loaded.biases):
            assert np.array_equal(a, b)

    def test_format_header(self, tmp_path):
        net = small_net((2, 3, 1), seed=19)
        path = tmp_path / "model.txt"
        save_network(net, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "exoticnet-model v1"
        assert lines[1] == "2 3 1"
        assert lines[2] == "sigmoid sigmoid"
        assert len(lines) == 3 + 2 * net.n_layers

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "bogus.txt"
        path.write_text("something else\n")
        with pytest.raises(Exception, match="not a model file"):
            load_network(path)
