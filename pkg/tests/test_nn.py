import numpy as np
import pytest

from dctpatch import nn
from conftest import max_rel_error, numeric_grad

F64 = np.float64


def linear_params(n_in, n_out, seed=0):
    return nn.init_linear(n_in, n_out, np.random.default_rng(seed), F64)


def conv_params(cin, cout, k, seed=0):
    return nn.init_conv(cin, cout, k, np.random.default_rng(seed), F64)


def check_layer_grads(forward, backward, x, params, rng, max_entries=None, tol=1e-4):
    """Compare analytic gradients of sum(out * probe) against central differences."""
    out, _ = forward(x)
    probe = rng.standard_normal(out.shape)

    def loss():
        return float(np.sum(forward(x)[0] * probe))

    for p in params:
        p.zero_grad()
    _, cache = forward(x)
    dx = backward(probe, cache)

    def pick(arr):
        if max_entries is None or arr.size <= max_entries:
            return None
        return rng.choice(arr.size, max_entries, replace=False)

    errors = [max_rel_error(dx, numeric_grad(loss, x, index=pick(x)))]
    for p in params:
        errors.append(max_rel_error(p.grad, numeric_grad(loss, p.value, index=pick(p.value))))
    assert max(errors) < tol, errors
    return max(errors)


class TestLinear:
    def test_identity(self):
        p = nn.LinearParams(nn.Param(np.eye(3)), nn.Param(np.zeros(3)))
        x = np.arange(6.0).reshape(2, 3)
        np.testing.assert_array_equal(nn.linear_forward(x, p)[0], x)

    def test_arithmetic(self):
        p = nn.LinearParams(nn.Param(np.array([[3.0, 4.0]])), nn.Param(np.array([5.0])))
        assert nn.linear_forward(np.array([[1.0, 2.0]]), p)[0].tolist() == [[16.0]]

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.linear_forward(np.zeros((2, 4)), linear_params(3, 2))

    def test_gradients(self):
        rng = np.random.default_rng(0)
        p = linear_params(8, 3)
        x = rng.standard_normal((4, 8))
        err = check_layer_grads(lambda v: nn.linear_forward(v, p),
                                lambda d, c: nn.linear_backward(d, c, p), x, p.params(), rng, tol=1e-5)
        assert err < 1e-5


class TestConv:
    def test_sum_kernel(self):
        x = np.random.default_rng(1).random((1, 1, 5, 5))
        p = nn.ConvParams(nn.Param(np.ones((1, 1, 5, 5))), nn.Param(np.zeros(1)))
        out = nn.conv2d_forward(x, p)[0]
        assert out.shape == (1, 1, 1, 1)
        assert out[0, 0, 0, 0] == pytest.approx(x.sum())

    def test_delta_kernel_crops(self):
        x = np.random.default_rng(2).random((1, 1, 8, 8))
        w = np.zeros((1, 1, 3, 3))
        w[0, 0, 1, 2] = 1.0
        p = nn.ConvParams(nn.Param(w), nn.Param(np.zeros(1)))
        np.testing.assert_allclose(nn.conv2d_forward(x, p)[0][0, 0], x[0, 0, 1:7, 2:8])

    def test_cross_correlation_not_convolution(self):
        x = np.zeros((1, 1, 2, 2))
        x[0, 0, 0, 0] = 1.0
        w = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])
        p = nn.ConvParams(nn.Param(w), nn.Param(np.zeros(1)))
        assert nn.conv2d_forward(x, p)[0].item() == 1.0

    def test_paper_shape(self):
        p = conv_params(1, 6, 5)
        assert nn.conv2d_forward(np.zeros((2, 1, 32, 32)), p)[0].shape == (2, 6, 28, 28)

    def test_undersized(self):
        with pytest.raises(ValueError):
            nn.conv2d_forward(np.zeros((1, 1, 4, 4)), conv_params(1, 1, 5))
        with pytest.raises(ValueError):
            nn.conv2d_forward(np.zeros((1, 2, 8, 8)), conv_params(1, 1, 3))

    def test_gradients(self):
        rng = np.random.default_rng(3)
        p = conv_params(3, 4, 3)
        x = rng.standard_normal((2, 3, 8, 8))
        check_layer_grads(lambda v: nn.conv2d_forward(v, p),
                          lambda d, c: nn.conv2d_backward(d, c, p), x, p.params(), rng)

    @pytest.mark.parametrize("shape", [(2, 1, 32, 32, 6), (2, 6, 14, 14, 16)])
    def test_gradients_paper_shapes(self, shape):
        bsz, cin, h, w, cout = shape
        rng = np.random.default_rng(4)
        p = conv_params(cin, cout, 5)
        x = rng.standard_normal((bsz, cin, h, w))
        check_layer_grads(lambda v: nn.conv2d_forward(v, p),
                          lambda d, c: nn.conv2d_backward(d, c, p), x, p.params(), rng, max_entries=60)


class TestMaxPool:
    def test_block(self):
        out, _ = nn.maxpool2x2_forward(np.array([[[[1.0, 2.0], [3.0, 4.0]]]]))
        assert out.item() == 4.0

    def test_tie_routes_to_top_left(self):
        x = np.full((1, 1, 2, 2), 7.0)
        out, cache = nn.maxpool2x2_forward(x)
        assert out.item() == 7.0
        dx = nn.maxpool2x2_backward(np.ones((1, 1, 1, 1)), cache)
        np.testing.assert_array_equal(dx[0, 0], [[1, 0], [0, 0]])

    def test_odd_dims(self):
        with pytest.raises(ValueError):
            nn.maxpool2x2_forward(np.zeros((1, 1, 3, 4)))

    def test_gradients(self):
        rng = np.random.default_rng(5)
        # distinct values keep every argmax unique under +-eps perturbation
        x = rng.permutation(32).reshape(1, 2, 4, 4).astype(F64)
        check_layer_grads(nn.maxpool2x2_forward, nn.maxpool2x2_backward, x, [], rng, tol=1e-7)


class TestRelu:
    def test_forward(self):
        assert nn.relu_forward(np.array([-1.0, 0.0, 2.0]))[0].tolist() == [0, 0, 2]

    def test_mask_at_zero(self):
        _, mask = nn.relu_forward(np.array([-1.0, 0.0, 2.0]))
        assert nn.relu_backward(np.ones(3), mask).tolist() == [0, 0, 1]

    def test_gradients(self):
        rng = np.random.default_rng(6)
        x = rng.standard_normal((3, 7))
        x[np.abs(x) < 1e-3] = 0.5
        check_layer_grads(nn.relu_forward, nn.relu_backward, x, [], rng, tol=1e-7)


class TestMse:
    def test_zero(self):
        x = np.random.default_rng(0).random((4, 10))
        loss, grad = nn.mse_loss(x, x.copy())
        assert loss == 0 and not grad.any()

    def test_half(self):
        assert nn.mse_loss(np.array([[1.0, 0.0]]), np.zeros((1, 2)))[0] == 0.5

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.mse_loss(np.zeros((2, 10)), np.zeros((1, 10)))

    def test_gradient(self):
        rng = np.random.default_rng(7)
        pred = rng.standard_normal((5, 10))
        target = np.eye(10)[rng.integers(0, 10, 5)]
        _, grad = nn.mse_loss(pred, target)
        numeric = numeric_grad(lambda: nn.mse_loss(pred, target)[0], pred)
        assert max_rel_error(grad, numeric) < 1e-7

    def test_divisor_is_all_elements(self):
        pred = np.ones((3, 10))
        _, grad = nn.mse_loss(pred, np.zeros((3, 10)))
        np.testing.assert_allclose(grad, 2.0 / 30)


class TestSgd:
    def test_plain(self):
        p = nn.Param(np.array([1.0]))
        p.grad[:] = 1.0
        nn.sgd_step([p], lr=0.01)
        assert p.value.item() == pytest.approx(0.99)

    def test_momentum_recurrence(self):
        p = nn.Param(np.array([0.0]))
        p.grad[:] = 1.0
        nn.sgd_step([p], lr=1.0, momentum=0.9)
        assert p.value.item() == pytest.approx(-1.0)
        nn.sgd_step([p], lr=1.0, momentum=0.9)
        assert p.velocity.item() == pytest.approx(1.9)
        assert p.value.item() == pytest.approx(-2.9)

    def test_quadratic_descends(self):
        p = nn.Param(np.array([3.0]))
        losses = []
        for _ in range(50):
            p.grad[:] = 2 * p.value  # d/dw of w^2
            losses.append(p.value.item() ** 2)
            nn.sgd_step([p], lr=0.05, momentum=0.0)
        assert all(b < a for a, b in zip(losses, losses[1:]))

    @pytest.mark.parametrize("seed", range(20))
    def test_small_step_does_not_increase_batch_loss(self, seed):
        rng = np.random.default_rng(seed)
        p1, p2 = linear_params(12, 8, seed), linear_params(8, 10, seed + 100)
        x = rng.standard_normal((6, 12))
        target = np.eye(10)[rng.integers(0, 10, 6)]
        params = p1.params() + p2.params()

        def run():
            h, c1 = nn.linear_forward(x, p1)
            h, r = nn.relu_forward(h)
            out, c2 = nn.linear_forward(h, p2)
            return nn.mse_loss(out, target), (c1, r, c2)

        (before, dout), (c1, r, c2) = run()
        nn.zero_grads(params)
        d = nn.linear_backward(dout, c2, p2)
        nn.linear_backward(nn.relu_backward(d, r), c1, p1)
        nn.sgd_step(params, lr=1e-4)
        assert run()[0][0] <= before


class TestInit:
    def test_deterministic(self):
        a = nn.init_linear(20, 5, np.random.default_rng(9))
        b = nn.init_linear(20, 5, np.random.default_rng(9))
        assert a.weight.value.tobytes() == b.weight.value.tobytes()
        assert a.bias.value.tobytes() == b.bias.value.tobytes()

    def test_bounds(self):
        p = nn.init_conv(6, 16, 5, np.random.default_rng(0))
        bound = 1 / np.sqrt(150)
        assert np.abs(p.kernels.value).max() <= bound
        assert np.abs(p.bias.value).max() <= bound

    def test_mean_near_zero(self):
        p = nn.init_linear(100, 1000, np.random.default_rng(1), F64)
        w = p.weight.value.ravel()
        sigma = (0.1 / np.sqrt(3)) / np.sqrt(w.size)  # std of U(-0.1, 0.1) mean
        assert abs(w.mean()) < 3 * sigma


class TestCheckpoint:
    def arrays(self):
        rng = np.random.default_rng(0)
        return [rng.standard_normal((3, 2, 5, 5)).astype(np.float32),
                rng.standard_normal(7).astype(np.float32)]

    def test_round_trip(self):
        arrays = self.arrays()
        back = nn.loads_weights(nn.dumps_weights(arrays))
        for a, b in zip(arrays, back):
            np.testing.assert_array_equal(a, b)

    def test_layout(self):
        data = nn.dumps_weights([np.ones((2, 3), np.float32)])
        assert data[:4] == b"NNWT"
        assert np.frombuffer(data[:20], "<u4")[1:].tolist() == [1, 1, 2, 2]
        assert len(data) == 4 + 4 + 4 + 4 + 8 + 24

    @pytest.mark.parametrize("cut", [3, 11, 20, -1])
    def test_truncated(self, cut):
        data = nn.dumps_weights(self.arrays())
        with pytest.raises(nn.CheckpointError):
            nn.loads_weights(data[:cut])

    def test_bad_magic(self):
        with pytest.raises(nn.CheckpointError):
            nn.loads_weights(b"XXXX" + nn.dumps_weights(self.arrays())[4:])

    def test_assign_shape_mismatch(self):
        p = linear_params(4, 2)
        with pytest.raises(nn.CheckpointError):
            nn.assign_weights(p.params(), [np.zeros((2, 3)), np.zeros(2)])
