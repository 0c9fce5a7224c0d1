"""Forward/backward correctness of the CNN engine. Every backward is held
against central finite differences through a random linear functional of
the op's output."""

import math

import numpy as np
import pytest

from dacp.engine import network as nn
from dacp.engine import ops
from dacp.errors import DivergenceError, ShapeError

from conftest import central_diff_grad, make_toy_net, rel_error


class TestConvForward:
    def test_scalar_product(self):
        x = np.full((1, 1, 1, 1), 3.0)
        w = np.full((1, 1, 1, 1), 2.0)
        out = ops.conv2d_forward(x, w)
        assert out.shape == (1, 1, 1, 1)
        assert out[0, 0, 0, 0] == 6.0

    def test_identity_kernel(self, rng):
        x = rng.normal(size=(2, 5, 5, 1))
        w = np.zeros((3, 3, 1, 1))
        w[1, 1, 0, 0] = 1.0
        out = ops.conv2d_forward(x, w, stride=1, padding=1)
        np.testing.assert_array_equal(out, x)

    def test_1x1_kernel_constant_channels(self):
        x = np.ones((1, 2, 2, 1))
        w = np.array([1.0, 2.0, 3.0]).reshape(1, 1, 1, 3)
        out = ops.conv2d_forward(x, w)
        for k, expected in enumerate([1.0, 2.0, 3.0]):
            np.testing.assert_allclose(out[0, :, :, k], expected)

    def test_output_dims_rule(self, rng):
        x = rng.normal(size=(1, 9, 7, 2))
        w = rng.normal(size=(3, 3, 2, 4))
        out = ops.conv2d_forward(x, w, stride=2, padding=1)
        assert out.shape == (1, (9 + 2 - 3) // 2 + 1, (7 + 2 - 3) // 2 + 1, 4)

    def test_channel_mismatch_is_structured_error(self, rng):
        with pytest.raises(ShapeError, match="channels"):
            ops.conv2d_forward(rng.normal(size=(1, 4, 4, 3)),
                               rng.normal(size=(3, 3, 2, 4)))

    def test_matches_naive_loops(self, rng):
        x = rng.normal(size=(2, 5, 4, 3))
        w = rng.normal(size=(3, 2, 3, 4))
        stride, padding = 1, 1
        out = ops.conv2d_forward(x, w, stride, padding)
        xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
        b, oh, ow, n = out.shape
        expected = np.zeros_like(out)
        for bi in range(b):
            for i in range(oh):
                for j in range(ow):
                    for k in range(n):
                        patch = xp[bi, i * stride:i * stride + 3,
                                   j * stride:j * stride + 2, :]
                        expected[bi, i, j, k] = (patch * w[:, :, :, k]).sum()
        np.testing.assert_allclose(out, expected, rtol=1e-12)


class TestConvBackward:
    def test_zero_grad_out(self, rng):
        x = rng.normal(size=(1, 3, 3, 2))
        w = rng.normal(size=(2, 2, 2, 3))
        gx, gw = ops.conv2d_backward(np.zeros((1, 2, 2, 3)), x, w)
        assert not gx.any() and not gw.any()

    def test_scalar_case(self):
        x = np.full((1, 1, 1, 1), 3.0)
        w = np.full((1, 1, 1, 1), 2.0)
        g = np.full((1, 1, 1, 1), 0.25)
        gx, gw = ops.conv2d_backward(g, x, w)
        assert gw[0, 0, 0, 0] == 0.25 * 3.0
        assert gx[0, 0, 0, 0] == 0.25 * 2.0

    def test_4x4x2x3_kernel_finite_differences(self, rng):
        x = rng.normal(size=(2, 6, 6, 2))
        w = rng.normal(size=(4, 4, 2, 3))
        cot = rng.normal(size=ops.conv2d_forward(x, w).shape)
        gx, gw = ops.conv2d_backward(cot, x, w)
        assert rel_error(gw, central_diff_grad(
            lambda v: float((ops.conv2d_forward(x, v) * cot).sum()), w.copy())) <= 1e-5
        assert rel_error(gx, central_diff_grad(
            lambda v: float((ops.conv2d_forward(v, w) * cot).sum()), x.copy())) <= 1e-5

    @pytest.mark.parametrize("stride,padding", [(1, 0), (1, 1), (2, 1)])
    def test_finite_differences(self, rng, stride, padding):
        x = rng.normal(size=(2, 4, 4, 2))
        w = rng.normal(size=(3, 3, 2, 3))
        cot = rng.normal(size=ops.conv2d_forward(x, w, stride, padding).shape)

        def f_of_w(wv):
            return float((ops.conv2d_forward(x, wv, stride, padding) * cot).sum())

        def f_of_x(xv):
            return float((ops.conv2d_forward(xv, w, stride, padding) * cot).sum())

        gx, gw = ops.conv2d_backward(cot, x, w, stride, padding)
        assert rel_error(gw, central_diff_grad(f_of_w, w.copy())) <= 1e-5
        assert rel_error(gx, central_diff_grad(f_of_x, x.copy())) <= 1e-5


class TestOtherLayerBackwards:
    def test_dense_finite_differences(self, rng):
        x = rng.normal(size=(4, 6))
        w = rng.normal(size=(6, 3))
        b = rng.normal(size=3)
        cot = rng.normal(size=(4, 3))
        gx, gw, gb = ops.dense_backward(cot, x, w)
        assert rel_error(gw, central_diff_grad(
            lambda wv: float((ops.dense_forward(x, wv, b) * cot).sum()), w.copy())) <= 1e-5
        assert rel_error(gx, central_diff_grad(
            lambda xv: float((ops.dense_forward(xv, w, b) * cot).sum()), x.copy())) <= 1e-5
        np.testing.assert_allclose(gb, cot.sum(axis=0), rtol=1e-12)

    def test_relu_finite_differences(self, rng):
        # keep activations away from the kink at 0
        x = rng.uniform(0.1, 1.0, size=(3, 4, 4, 2)) * rng.choice([-1.0, 1.0], size=(3, 4, 4, 2))
        cot = rng.normal(size=x.shape)
        g = ops.relu_backward(cot, x)
        fd = central_diff_grad(lambda xv: float((ops.relu_forward(xv) * cot).sum()), x.copy())
        assert rel_error(g, fd) <= 1e-5

    def test_maxpool_forward_and_backward(self, rng):
        x = rng.normal(size=(2, 6, 6, 3))
        out = ops.maxpool2_forward(x)
        assert out.shape == (2, 3, 3, 3)
        assert out[0, 0, 0, 0] == x[0, :2, :2, 0].max()
        cot = rng.normal(size=out.shape)
        g = ops.maxpool2_backward(cot, x)
        fd = central_diff_grad(lambda xv: float((ops.maxpool2_forward(xv) * cot).sum()), x.copy())
        assert rel_error(g, fd) <= 1e-5

    def test_maxpool_odd_dims_truncate(self, rng):
        x = rng.normal(size=(1, 5, 7, 2))
        out = ops.maxpool2_forward(x)
        assert out.shape == (1, 2, 3, 2)
        g = ops.maxpool2_backward(np.ones_like(out), x)
        assert g.shape == x.shape
        assert not g[:, 4:, :, :].any() and not g[:, :, 6:, :].any()

    def test_flatten_roundtrip(self, rng):
        x = rng.normal(size=(2, 3, 4, 5))
        flat = ops.flatten_forward(x)
        assert flat.shape == (2, 60)
        np.testing.assert_array_equal(ops.flatten_backward(flat, x), x)


class TestSoftmaxCrossEntropy:
    def test_uniform_logits(self):
        logits = np.zeros((4, 10))
        loss, _ = ops.softmax_cross_entropy(logits, np.array([1, 3, 5, 9]))
        assert loss == pytest.approx(math.log(10.0), rel=1e-12)

    def test_saturated_true_class(self):
        logits = np.zeros((1, 5))
        logits[0, 2] = 1000.0
        loss, _ = ops.softmax_cross_entropy(logits, np.array([2]))
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_two_class_closed_form(self):
        logits = np.array([[0.0, 1.0]])
        loss, _ = ops.softmax_cross_entropy(logits, np.array([0]))
        assert loss == pytest.approx(math.log(1.0 + math.e), rel=1e-12)

    def test_gradient_finite_differences(self, rng):
        logits = rng.normal(size=(5, 4))
        labels = rng.integers(0, 4, size=5)
        _, grad = ops.softmax_cross_entropy(logits, labels)
        fd = central_diff_grad(
            lambda lv: ops.softmax_cross_entropy(lv, labels)[0], logits.copy())
        assert rel_error(grad, fd) <= 1e-5

    def test_label_out_of_range(self):
        with pytest.raises(ShapeError):
            ops.softmax_cross_entropy(np.zeros((1, 3)), np.array([3]))


class TestSgdStep:
    def _one_weight_net(self, value):
        layers = [nn.conv(1, 1, 1, 1), nn.LayerSpec(nn.FLATTEN),
                  nn.dense(1, 2), nn.LayerSpec(nn.SOFTMAX_CE_HEAD)]
        net = nn.Network(layers, seed=0)
        net.weights[0][:] = value
        return net

    def test_zero_lr(self):
        net = self._one_weight_net(1.0)
        nn.sgd_step(net, {0: np.full((1, 1, 1, 1), 0.5)}, lr=0.0)
        assert net.weights[0][0, 0, 0, 0] == 1.0

    def test_single_step_arithmetic(self):
        net = self._one_weight_net(1.0)
        nn.sgd_step(net, {0: np.full((1, 1, 1, 1), 0.5)}, lr=0.1)
        assert net.weights[0][0, 0, 0, 0] == pytest.approx(0.95, abs=1e-15)

    def test_two_steps_sum_for_fixed_grads(self):
        g = {0: np.full((1, 1, 1, 1), 0.5)}
        net_a = self._one_weight_net(1.0)
        nn.sgd_step(net_a, g, lr=0.1)
        nn.sgd_step(net_a, g, lr=0.1)
        net_b = self._one_weight_net(1.0)
        nn.sgd_step(net_b, {0: 2 * g[0]}, lr=0.1)
        assert net_a.weights[0][0, 0, 0, 0] == pytest.approx(
            net_b.weights[0][0, 0, 0, 0], abs=1e-15)

    def test_non_finite_grad_aborts_naming_layer(self):
        net = self._one_weight_net(1.0)
        with pytest.raises(DivergenceError, match="layer 0"):
            nn.sgd_step(net, {0: np.full((1, 1, 1, 1), np.nan)}, lr=0.1)


class TestNetwork:
    def test_untrained_loss_near_ln_k(self, rng):
        # pixel-range inputs, like the datasets feed; hotter inputs inflate
        # the logit scale and with it the untrained loss
        net = make_toy_net(rng, n_classes=10, c1=8, c2=16)
        x = rng.uniform(0.0, 1.0, size=(64, 8, 8, 1))
        labels = rng.integers(0, 10, size=64)
        logits, _ = net.forward(x)
        loss, _ = ops.softmax_cross_entropy(logits, labels)
        assert abs(loss - math.log(10.0)) / math.log(10.0) <= 0.05

    def test_whole_net_gradient_check(self, rng):
        net = make_toy_net(rng, hw=4, c1=3, c2=4, n_classes=2)
        x = rng.normal(size=(2, 4, 4, 1))
        labels = np.array([0, 1])
        _, grads, _ = net.loss_and_grads(x, labels)
        for i in sorted(grads):
            g = grads[i][0] if isinstance(grads[i], tuple) else grads[i]

            def loss_of(wv, i=i):
                saved = net.weights[i]
                net.weights[i] = wv
                logits, _ = net.forward(x)
                loss, _ = ops.softmax_cross_entropy(logits, labels)
                net.weights[i] = saved
                return loss

            fd = central_diff_grad(loss_of, net.weights[i].copy())
            assert rel_error(g, fd) <= 1e-5, f"layer {i}"

    def test_residual_add_forward_and_gradient(self, rng):
        layers = [
            nn.conv(3, 3, 2, 3, padding=1),
            nn.LayerSpec(nn.RELU),
            nn.conv(3, 3, 3, 3, padding=1),
            nn.LayerSpec(nn.RESIDUAL_ADD, source=1),
            nn.LayerSpec(nn.RELU),
            nn.LayerSpec(nn.FLATTEN),
            nn.dense(4 * 4 * 3, 2),
            nn.LayerSpec(nn.SOFTMAX_CE_HEAD),
        ]
        net = nn.Network(layers, seed=7)
        x = rng.normal(size=(2, 4, 4, 2))
        logits, acts = net.forward(x)
        np.testing.assert_allclose(
            acts[3], ops.conv2d_forward(acts[1], net.weights[2], 1, 1) + acts[1],
            rtol=1e-12)
        labels = np.array([1, 0])
        _, grads, _ = net.loss_and_grads(x, labels)
        for i in (0, 2):
            def loss_of(wv, i=i):
                saved = net.weights[i]
                net.weights[i] = wv
                logits, _ = net.forward(x)
                loss, _ = ops.softmax_cross_entropy(logits, labels)
                net.weights[i] = saved
                return loss

            fd = central_diff_grad(loss_of, net.weights[i].copy())
            assert rel_error(grads[i], fd) <= 1e-5, f"conv {i}"

    def test_residual_shape_mismatch(self, rng):
        layers = [
            nn.conv(3, 3, 1, 2, padding=1),
            nn.LayerSpec(nn.RELU),
            nn.conv(3, 3, 2, 3, padding=1),  # 3 filters vs 2 on the shortcut
            nn.LayerSpec(nn.RESIDUAL_ADD, source=1),
            nn.LayerSpec(nn.FLATTEN),
            nn.dense(48, 2),
            nn.LayerSpec(nn.SOFTMAX_CE_HEAD),
        ]
        net = nn.Network(layers, seed=0)
        with pytest.raises(ShapeError, match="residual_add"):
            net.forward(rng.normal(size=(1, 4, 4, 1)))

    def test_head_placement_validated(self):
        with pytest.raises(ShapeError):
            nn.Network([nn.dense(4, 2)], seed=0)
        with pytest.raises(ShapeError):
            nn.Network([nn.LayerSpec(nn.SOFTMAX_CE_HEAD),
                        nn.LayerSpec(nn.SOFTMAX_CE_HEAD)], seed=0)

    def test_deterministic_init_and_training_step(self, rng):
        x = np.random.default_rng(5).normal(size=(8, 8, 8, 1))
        labels = np.random.default_rng(6).integers(0, 3, size=8)
        results = []
        for _ in range(2):
            net = make_toy_net(np.random.default_rng(99))
            for _ in range(3):
                _, grads, _ = net.loss_and_grads(x, labels)
                nn.sgd_step(net, grads, lr=0.05)
            results.append({i: w.copy() for i, w in net.weights.items()})
        for i in results[0]:
            np.testing.assert_array_equal(results[0][i], results[1][i])
