import numpy as np
import pytest

from gdwct.errors import ArgumentError, GroupDivisibilityError, ShapeError
from gdwct.tensor import (Tensor, elementwise, flatten_spatial, group_merge,
                          group_split, reduce, stack)

from conftest import assert_grad_matches


class TestMatmul:
    def test_identity(self):
        a = Tensor([[1.0, 2.0], [3.0, 4.0]])
        out = Tensor(np.eye(2)).matmul(a)
        np.testing.assert_array_equal(out.data, a.data)

    def test_hand_product(self):
        out = Tensor([[1.0, 2.0], [3.0, 4.0]]).matmul(Tensor([[5.0], [6.0]]))
        np.testing.assert_array_equal(out.data, [[17.0], [39.0]])

    def test_backward_hand_case(self):
        a = Tensor([[1.0, 1.0]], requires_grad=True)
        b = Tensor([[2.0], [3.0]])
        a.matmul(b).sum().backward()
        np.testing.assert_allclose(a.grad, [[2.0, 3.0]], rtol=1e-12)

    def test_dimension_mismatch_names_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            Tensor(np.ones((2, 3))).matmul(Tensor(np.ones((2, 3))))

    def test_batched_grad(self, rng):
        a = Tensor(rng.uniform(-1, 1, (3, 2, 4)), requires_grad=True)
        b = Tensor(rng.uniform(-1, 1, (3, 4, 2)), requires_grad=True)
        assert_grad_matches(lambda: a.matmul(b).tanh().sum(), [a, b])


class TestConv2d:
    def test_ones_summation(self):
        x = Tensor(np.ones((1, 1, 3, 3)))
        w = Tensor(np.ones((1, 1, 3, 3)))
        out = x.conv2d(w)
        np.testing.assert_array_equal(out.data, [[[[9.0]]]])

    def test_identity_kernel(self, rng):
        x = Tensor(rng.uniform(-1, 1, (2, 3, 5, 5)))
        w = np.zeros((3, 3, 1, 1))
        for c in range(3):
            w[c, c, 0, 0] = 1.0
        out = x.conv2d(Tensor(w))
        np.testing.assert_array_equal(out.data, x.data)

    def test_stride_output_shape(self):
        out = Tensor(np.zeros((1, 1, 4, 4))).conv2d(Tensor(np.zeros((1, 1, 2, 2))), stride=2)
        assert out.shape == (1, 1, 2, 2)

    def test_kernel_too_large(self):
        with pytest.raises(ShapeError):
            Tensor(np.zeros((1, 1, 3, 3))).conv2d(Tensor(np.zeros((1, 1, 5, 5))))

    def test_gradients(self, rng):
        x = Tensor(rng.uniform(-1, 1, (2, 2, 5, 4)), requires_grad=True)
        w = Tensor(rng.uniform(-1, 1, (3, 2, 3, 3)), requires_grad=True)
        assert_grad_matches(lambda: x.conv2d(w, stride=2, pad=1).tanh().sum(), [x, w])


class TestElementwise:
    def test_relu_signs(self):
        out = elementwise("relu", Tensor([-1.0, 0.0, 2.0]))
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])

    def test_add_zero_identity(self, rng):
        x = Tensor(rng.uniform(-1, 1, (3, 2)))
        np.testing.assert_array_equal(elementwise("add", x, 0.0).data, x.data)

    def test_tanh_derivative_value(self):
        x = Tensor(0.5, requires_grad=True)
        x.tanh().backward()
        expected = 1.0 - np.tanh(0.5) ** 2
        assert abs(x.grad - expected) < 1e-12
        assert abs(expected - 0.78645) < 1e-5

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            elementwise("add", Tensor(np.ones((2, 3))), Tensor(np.ones((3, 2))))

    def test_scalar_broadcast(self, rng):
        x = Tensor(rng.uniform(-1, 1, (2, 2)), requires_grad=True)
        s = Tensor(0.7, requires_grad=True)
        assert_grad_matches(lambda: (x * s).sum(), [x, s])

    def test_leaky_relu_slope(self):
        x = Tensor([-10.0], requires_grad=True)
        x.leaky_relu().sum().backward()
        assert x.grad[0] == 0.2

    @pytest.mark.parametrize("tag", ["add", "sub", "mul"])
    def test_binary_gradients(self, tag, rng):
        a = Tensor(rng.uniform(-1, 1, (3, 3)), requires_grad=True)
        b = Tensor(rng.uniform(-1, 1, (3, 3)), requires_grad=True)
        assert_grad_matches(lambda: elementwise(tag, a, b).tanh().sum(), [a, b])


class TestReduce:
    def test_mean(self):
        assert reduce("mean", Tensor([1.0, 2.0, 3.0])).item() == 2.0

    def test_sum_of_zeros(self):
        assert reduce("sum", Tensor(np.zeros((4, 4)))).item() == 0.0

    def test_mean_axis(self):
        out = reduce("mean", Tensor([[1.0, 3.0], [2.0, 4.0]]), axes=1)
        np.testing.assert_array_equal(out.data, [2.0, 3.0])

    def test_repeated_axis_rejected(self):
        with pytest.raises(ArgumentError):
            reduce("sum", Tensor(np.zeros((2, 2))), axes=(0, 0))

    def test_out_of_range_axis_rejected(self):
        with pytest.raises(ArgumentError):
            reduce("mean", Tensor(np.zeros((2, 2))), axes=5)

    def test_mean_gradient_distributes(self):
        x = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
        x.mean().backward()
        np.testing.assert_allclose(x.grad, np.full((2, 3), 1 / 6))


class TestRearrange:
    def test_group_split_shape(self):
        assert group_split(Tensor(np.zeros((4, 10))), 2).shape == (2, 2, 10)

    def test_flatten_spatial(self):
        assert flatten_spatial(Tensor(np.zeros((8, 4, 4)))).shape == (8, 16)

    def test_group_split_divisibility(self):
        with pytest.raises(GroupDivisibilityError):
            group_split(Tensor(np.zeros((8, 2))), 3)

    def test_group_merge_inverts(self, rng):
        x = Tensor(rng.uniform(-1, 1, (6, 5)))
        np.testing.assert_array_equal(group_merge(group_split(x, 3)).data, x.data)

    def test_rearrange_gradient_is_inverse(self, rng):
        x = Tensor(rng.uniform(-1, 1, (4, 6)), requires_grad=True)
        assert_grad_matches(lambda: group_split(x, 2).tanh().sum(), [x])


class TestBackward:
    def test_sum_gradient(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, [1.0, 1.0, 1.0])

    def test_square_gradient(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        (x * x).sum().backward()
        np.testing.assert_array_equal(x.grad, [2.0, 4.0])

    def test_reuse_accumulates(self):
        x = Tensor([1.0, 5.0], requires_grad=True)
        (x + x).sum().backward()
        np.testing.assert_array_equal(x.grad, [2.0, 2.0])

    def test_non_scalar_root_rejected(self):
        with pytest.raises(ArgumentError):
            Tensor(np.zeros(3), requires_grad=True).backward()

    def test_multiple_backwards_accumulate(self):
        x = Tensor([1.0], requires_grad=True)
        x.sum().backward()
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, [2.0])

    def test_linearity(self, rng):
        data = rng.uniform(-1, 1, 5)
        x1 = Tensor(data.copy(), requires_grad=True)
        (x1.tanh().sum().scale(2.0) + (x1 * x1).sum().scale(3.0)).backward()
        xa = Tensor(data.copy(), requires_grad=True)
        xa.tanh().sum().backward()
        xb = Tensor(data.copy(), requires_grad=True)
        (xb * xb).sum().backward()
        np.testing.assert_allclose(x1.grad, 2.0 * xa.grad + 3.0 * xb.grad, rtol=1e-12)

    def test_detach_stops_gradient(self):
        x = Tensor([2.0], requires_grad=True)
        (x.detach() * x).sum().backward()
        np.testing.assert_array_equal(x.grad, [2.0])


class TestDeterminism:
    def test_bit_identical_forward_and_grad(self, rng):
        data = rng.uniform(-1, 1, (2, 3, 8, 8))
        wdat = rng.uniform(-1, 1, (4, 3, 3, 3))
        results = []
        for _ in range(2):
            x = Tensor(data.copy(), requires_grad=True)
            w = Tensor(wdat.copy(), requires_grad=True)
            out = x.conv2d(w, stride=1, pad=1).leaky_relu().mean()
            out.backward()
            results.append((out.item(), x.grad.copy(), w.grad.copy()))
        assert results[0][0] == results[1][0]
        np.testing.assert_array_equal(results[0][1], results[1][1])
        np.testing.assert_array_equal(results[0][2], results[1][2])


class TestGradientSweep:
    """Analytic vs central finite differences on random inputs for every op."""

    def test_hundred_trials(self, rng):
        ops = [
            lambda t: t.relu().sum(),
            lambda t: t.leaky_relu().sum(),
            lambda t: t.tanh().sum(),
            lambda t: t.sigmoid().sum(),
            lambda t: t.abs().sum(),
            lambda t: (t * t).mean(),
            lambda t: t.scale(3.5).sum(),
            lambda t: t.reshape((6,)).tanh().sum(),
            lambda t: t.broadcast_to((4, 2, 3)).sigmoid().mean(),
            lambda t: t.transpose().matmul(t).sum(),
        ]
        trial = 0
        while trial < 100:
            for op in ops:
                # keep inputs away from relu/abs kinks
                data = rng.uniform(-1, 1, (2, 3))
                data[np.abs(data) < 0.05] = 0.1
                t = Tensor(data, requires_grad=True)
                assert_grad_matches(lambda: op(t), [t])
                trial += 1


def test_stack_gradient(rng):
    a = Tensor(rng.uniform(-1, 1, (2, 2)), requires_grad=True)
    b = Tensor(rng.uniform(-1, 1, (2, 2)), requires_grad=True)
    assert_grad_matches(lambda: stack([a, b]).tanh().sum(), [a, b])


def test_invariant_product_shape_equals_data_length(rng):
    t = Tensor(rng.uniform(-1, 1, (3, 4, 5)))
    assert int(np.prod(t.shape)) == t.data.size
