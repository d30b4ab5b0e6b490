import math

import numpy as np
import pytest

from gradcheck import max_grad_error
from itrc.rng import SeededRng
from itrc.tensor import (ShapeError, Tensor, add, backward, dropout, glorot_uniform,
                         leaky_relu, linear, relu, scale, softmax, softmax_cross_entropy,
                         tensor_sum, zero_grad)


class TestLinear:
    def test_identity_input(self):
        x = Tensor(np.eye(2))
        w = Tensor([[2.0, 0.0], [0.0, 3.0]])
        assert np.array_equal(linear(x, w).data, [[2.0, 0.0], [0.0, 3.0]])

    def test_bias_broadcast(self):
        y = linear(Tensor([[1.0, 1.0]]), Tensor([[1.0], [1.0]]), Tensor([1.0]))
        assert np.array_equal(y.data, [[3.0]])

    def test_zero_input(self):
        y = linear(Tensor(np.zeros((3, 4))), Tensor(np.ones((4, 2))),
                   Tensor(np.zeros(2)))
        assert np.array_equal(y.data, np.zeros((3, 2)))

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 2\)"):
            linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 2))))

    def test_bad_bias(self):
        with pytest.raises(ShapeError):
            linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 2))), Tensor(np.zeros(3)))


class TestLeakyRelu:
    @pytest.mark.parametrize("x,slope,expected", [
        (5.0, 0.01, 5.0),
        (-2.0, 0.01, -0.02),
        (-2.0, 0.0, 0.0),
    ])
    def test_values(self, x, slope, expected):
        out = leaky_relu(Tensor([[x]]), slope)
        assert out.data[0, 0] == pytest.approx(expected, abs=1e-15)

    def test_slope_domain(self):
        with pytest.raises(ValueError):
            leaky_relu(Tensor([1.0]), 1.0)
        with pytest.raises(ValueError):
            leaky_relu(Tensor([1.0]), -0.1)


class TestDropout:
    def test_eval_mode_is_identity(self):
        x = Tensor(np.arange(12.0).reshape(3, 4))
        out = dropout(x, 0.7, SeededRng(1), training=False)
        assert np.array_equal(out.data, x.data)

    def test_zero_rate_is_identity(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        out = dropout(x, 0.0, SeededRng(1), training=True)
        assert np.array_equal(out.data, x.data)

    def test_mask_reproducible_for_equal_seed(self):
        x = Tensor(np.ones((8, 8)))
        a = dropout(x, 0.5, SeededRng(42), training=True)
        b = dropout(x, 0.5, SeededRng(42), training=True)
        assert np.array_equal(a.data, b.data)

    def test_survivors_scaled(self):
        x = Tensor(np.ones((50, 50)))
        out = dropout(x, 0.5, SeededRng(3), training=True).data
        assert set(np.unique(out)) == {0.0, 2.0}

    def test_rate_one_rejected(self):
        with pytest.raises(ValueError):
            dropout(Tensor([1.0]), 1.0, SeededRng(0), training=True)


class TestSoftmaxCrossEntropy:
    def test_uniform_two_classes(self):
        loss, probs = softmax_cross_entropy(Tensor([[0.0, 0.0]]), np.array([0]))
        assert float(loss.data) == pytest.approx(math.log(2), abs=1e-12)
        assert np.allclose(probs.data, [[0.5, 0.5]])

    def test_extreme_logits_stable(self):
        loss, probs = softmax_cross_entropy(Tensor([[1000.0, -1000.0]]), np.array([0]))
        assert float(loss.data) == pytest.approx(0.0, abs=1e-12)
        assert np.isfinite(probs.data).all()

    def test_closed_form(self):
        loss, _ = softmax_cross_entropy(Tensor([[1.0, 2.0]]), np.array([1]))
        assert float(loss.data) == pytest.approx(math.log(1 + math.exp(-1)), abs=1e-12)

    def test_rows_sum_to_one(self):
        rng = SeededRng(7)
        logits = Tensor(rng.normal(size=(10, 4)) * 5)
        _, probs = softmax_cross_entropy(logits, np.zeros(10, dtype=int))
        assert np.abs(probs.data.sum(axis=1) - 1.0).max() < 1e-12
        assert probs.data.min() >= 0.0 and probs.data.max() <= 1.0

    def test_empty_mask_rejected(self):
        with pytest.raises(ValueError, match="no supervised rows"):
            softmax_cross_entropy(Tensor([[1.0, 2.0]]), np.array([0]),
                                  mask=np.array([False]))

    def test_masked_rows_excluded(self):
        logits = Tensor([[5.0, -5.0], [0.0, 0.0]])
        loss, _ = softmax_cross_entropy(logits, np.array([1, 0]),
                                        mask=np.array([False, True]))
        assert float(loss.data) == pytest.approx(math.log(2), abs=1e-12)

    def test_label_domain(self):
        with pytest.raises(ValueError):
            softmax_cross_entropy(Tensor([[0.0, 0.0]]), np.array([2]))


class TestBackward:
    def test_sum_gives_ones(self):
        w = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        backward(tensor_sum(w))
        assert np.array_equal(w.grad, np.ones((2, 3)))

    def test_leaky_gradient_on_negative(self):
        w = Tensor(-np.ones((2, 2)), requires_grad=True)
        backward(tensor_sum(leaky_relu(w, 0.01)))
        assert np.allclose(w.grad, 0.01)

    def test_non_scalar_rejected(self):
        w = Tensor(np.ones((2, 2)), requires_grad=True)
        with pytest.raises(ValueError, match="scalar"):
            backward(leaky_relu(w, 0.1))

    def test_double_backward_without_zero_is_error(self):
        w = Tensor(np.ones(3), requires_grad=True)
        backward(tensor_sum(w))
        with pytest.raises(RuntimeError, match="zero"):
            backward(tensor_sum(w))

    def test_backward_after_zero_grad_ok(self):
        w = Tensor(np.ones(3), requires_grad=True)
        backward(tensor_sum(w))
        zero_grad([w])
        backward(tensor_sum(scale(w, 2.0)))
        assert np.allclose(w.grad, 2.0)

    def test_shared_parent_accumulates(self):
        w = Tensor(np.ones(4), requires_grad=True)
        backward(tensor_sum(add(w, w)))
        assert np.allclose(w.grad, 2.0)


class TestGradientOracle:
    """Analytic gradients vs central finite differences on random instances."""

    def test_linear_with_bias(self):
        rng = SeededRng(11)
        for trial in range(5):
            x = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
            w = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
            b = Tensor(rng.normal(size=2), requires_grad=True)
            labels = np.array([0, 1, 0])

            def loss():
                return softmax_cross_entropy(linear(x, w, b), labels)[0]

            assert max_grad_error(loss, [x, w, b]) < 1e-6

    def test_leaky_relu_chain(self):
        rng = SeededRng(12)
        w = Tensor(rng.normal(size=(4, 4)), requires_grad=True)

        def loss():
            return tensor_sum(leaky_relu(w, 0.2))

        assert max_grad_error(loss, [w]) < 1e-6

    def test_dropout_with_fixed_mask(self):
        rng = SeededRng(13)
        w = Tensor(rng.normal(size=(5, 5)), requires_grad=True)

        def loss():
            return tensor_sum(dropout(relu(w), 0.4, SeededRng(99), training=True))

        assert max_grad_error(loss, [w]) < 1e-6


class TestInit:
    def test_glorot_bounds_and_determinism(self):
        limit = math.sqrt(6.0 / (30 + 20))
        a = glorot_uniform(30, 20, SeededRng(5))
        b = glorot_uniform(30, 20, SeededRng(5))
        assert a.data.shape == (30, 20)
        assert np.abs(a.data).max() <= limit
        assert np.array_equal(a.data, b.data)
        assert a.requires_grad


def test_softmax_rows_sum_to_one():
    z = softmax(Tensor(SeededRng(3).normal(size=(6, 3)) * 10))
    assert np.abs(z.sum(axis=1) - 1.0).max() < 1e-12
