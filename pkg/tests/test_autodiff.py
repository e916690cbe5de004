# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import numpy as np
import pytest

from maiplab.autodiff import (SGD, Adam, OptimConfig, Tensor, check_gradients, clip_grad_norm, conv2d, dense,
                              lstm_step, no_grad, num_grad, optimizer_step, get_cosine_schedule_with_warmup)
from maiplab.autodiff import functional as F
from maiplab.errors import ConfigurationError, ShapeError, UsageError


def reference_conv(x, kernel, bias, stride):
    c, h, w = x.shape
    k, _, kh, kw = kernel.shape
    oh, ow = (h - kh) // stride + 1, (w - kw) // stride + 1
    out = np.zeros((k, oh, ow))
    for o in range(k):
        for i in range(oh):
            for j in range(ow):
                total = bias[o]
                for ch in range(c):
                    for di in range(kh):
                        for dj in range(kw):
                            total += x[ch, i * stride + di, j * stride + dj] * kernel[o, ch, di, dj]
                out[o, i, j] = total
    return out


def sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def reference_lstm(x, h, c, w_ih, w_hh, bias):
    m = h.shape[0]
    h_out, c_out = np.zeros(m), np.zeros(m)
    for j in range(m):
        pre = [bias[g * m + j] + sum(w_ih[g * m + j, k] * x[k] for k in range(x.shape[0]))
               + sum(w_hh[g * m + j, k] * h[k] for k in range(m)) for g in range(4)]
        i, f, g, o = sigmoid(pre[0]), sigmoid(pre[1]), np.tanh(pre[2]), sigmoid(pre[3])
        c_out[j] = f * c[j] + i * g
        h_out[j] = o * np.tanh(c_out[j])
    return h_out, c_out


class TestConv2d:
    def test_zero_input(self):
        rng = np.random.default_rng(0)
        out = conv2d(np.zeros((2, 6, 6)), rng.normal(size=(3, 2, 3, 3)), np.zeros(3))
        np.testing.assert_array_equal(out.data, np.zeros((3, 4, 4)))

    def test_sum_of_ones(self):
        out = conv2d(np.ones((1, 3, 3)), np.ones((1, 1, 3, 3)), np.zeros(1))
        assert out.shape == (1, 1, 1)
        assert out.data[0, 0, 0] == 9.0

    @pytest.mark.parametrize('stride', [1, 2])
    def test_matches_loop_reference(self, stride):
        rng = np.random.default_rng(1)
        x, kernel, bias = rng.normal(size=(2, 7, 7)), rng.normal(size=(3, 2, 3, 3)), rng.normal(size=3)
        out = conv2d(x, kernel, bias, stride=stride)
        np.testing.assert_allclose(out.data, reference_conv(x, kernel, bias, stride), rtol=1e-12, atol=1e-12)

    def test_batched_input(self):
        rng = np.random.default_rng(2)
        x, kernel, bias = rng.normal(size=(4, 1, 5, 5)), rng.normal(size=(2, 1, 3, 3)), rng.normal(size=2)
        out = conv2d(x, kernel, bias)
        assert out.shape == (4, 2, 3, 3)
        np.testing.assert_allclose(out.data[3], reference_conv(x[3], kernel, bias, 1), rtol=1e-12)

    def test_channel_mismatch(self):
        with pytest.raises(ShapeError):
            conv2d(np.zeros((2, 5, 5)), np.zeros((1, 3, 3, 3)), np.zeros(1))

    def test_gradients(self):
        rng = np.random.default_rng(3)
        x = Tensor(rng.normal(size=(1, 2, 6, 6)), requires_grad=True)
        kernel = Tensor(rng.normal(size=(2, 2, 3, 3)), requires_grad=True)
        bias = Tensor(rng.normal(size=2), requires_grad=True)
        loss_fn = lambda: F.sum(F.tanh(conv2d(x, kernel, bias, stride=2)))
        report = check_gradients(loss_fn, [('x', x), ('kernel', kernel), ('bias', bias)])
        assert report.passed, report.format()


class TestDense:
    def test_identity(self):
        x = np.array([1.0, -2.0, 3.0])
        out = dense(x, np.eye(3), np.zeros(3))
        np.testing.assert_array_equal(out.data, x)

    def test_zero_tanh(self):
        out = dense(np.array([4.0, 5.0]), np.zeros((3, 2)), np.zeros(3), activation='tanh')
        np.testing.assert_array_equal(out.data, np.zeros(3))

    def test_matches_matmul(self):
        rng = np.random.default_rng(4)
        x, w, b = rng.normal(size=4), rng.normal(size=(3, 4)), rng.normal(size=3)
        expected = np.array([sum(w[i, k] * x[k] for k in range(4)) + b[i] for i in range(3)])
        np.testing.assert_allclose(dense(x, w, b).data, expected, rtol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            dense(np.zeros(5), np.zeros((3, 4)), np.zeros(3))

    def test_unknown_activation(self):
        with pytest.raises(ValueError):
            dense(np.zeros(2), np.zeros((2, 2)), np.zeros(2), activation='gelu')


class TestLSTMStep:
    def test_zero_state(self):
        m, n = 3, 2
        h, c = lstm_step(np.ones(n), np.zeros(m), np.zeros(m), np.zeros((4 * m, n)), np.zeros((4 * m, m)),
                         np.zeros(4 * m))
        np.testing.assert_array_equal(h.data, np.zeros(m))
        np.testing.assert_array_equal(c.data, np.zeros(m))

    def test_hand_evaluated_gates(self):
        m, n = 2, 3
        v = np.array([1.0, -2.0])
        h, c = lstm_step(np.ones(n), np.zeros(m), v, np.zeros((4 * m, n)), np.zeros((4 * m, m)), np.zeros(4 * m))
        np.testing.assert_allclose(c.data, 0.5 * v)
        np.testing.assert_allclose(h.data, 0.5 * np.tanh(0.5 * v))

    def test_matches_scalar_reference(self):
        rng = np.random.default_rng(5)
        m, n = 3, 4
        args = (rng.normal(size=n), rng.normal(size=m), rng.normal(size=m), rng.normal(size=(4 * m, n)),
                rng.normal(size=(4 * m, m)), rng.normal(size=4 * m))
        h, c = lstm_step(*args)
        h_ref, c_ref = reference_lstm(*args)
        np.testing.assert_allclose(h.data, h_ref, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(c.data, c_ref, rtol=1e-12, atol=1e-14)

    def test_hidden_width_mismatch(self):
        with pytest.raises(ShapeError):
            lstm_step(np.zeros(2), np.zeros(3), np.zeros(2), np.zeros((12, 2)), np.zeros((12, 3)), np.zeros(12))


class TestBackward:
    def test_sum(self):
        x = Tensor(np.arange(5.0), requires_grad=True)
        F.sum(x).backward()
        np.testing.assert_array_equal(x.grad, np.ones(5))

    def test_quadratic(self):
        x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
        grads = F.sum(x * x).backward()
        np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])
        np.testing.assert_array_equal(grads[x], [2.0, 4.0, 6.0])

    def test_non_scalar_loss(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(UsageError):
            (x * x).backward()

    def test_shared_subexpression_accumulates(self):
        x = Tensor([3.0], requires_grad=True)
        y = x * x
        F.sum(y + y).backward()
        np.testing.assert_allclose(x.grad, [12.0])

    def test_graph_released_unless_retained(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        loss = F.sum(x * x)
        loss.backward(retain_graph=True)
        loss.backward()
        np.testing.assert_allclose(x.grad, [4.0, 8.0])
        assert loss.is_leaf

    def test_no_grad_records_nothing(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = x * 2.0
        assert not y.requires_grad
        with pytest.raises(UsageError):
            y.backward()

    def test_wrap_angle_gradient_passes_through(self):
        x = Tensor([350.0, -10.0], requires_grad=True)
        out = F.wrap_angle(x)
        np.testing.assert_allclose(out.data, [-10.0, -10.0])
        F.sum(out).backward()
        np.testing.assert_array_equal(x.grad, [1.0, 1.0])

    def test_numerical_gradient_of_softplus(self):
        x = Tensor(np.linspace(-2, 2, 5), requires_grad=True)
        F.sum(F.softplus(x)).backward()
        numeric = num_grad(lambda: F.sum(F.softplus(x)), x)
        np.testing.assert_allclose(x.grad, numeric, rtol=1e-6)


class TestOptimizer:
    def test_plain_step(self):
        p = Tensor([1.0], requires_grad=True)
        optimizer_step({'p': p}, {'p': np.array([2.0])}, OptimConfig('sgd', lr=0.1))
        np.testing.assert_allclose(p.data, [0.8])

    @pytest.mark.parametrize('name', ['sgd', 'adam'])
    def test_zero_gradient_is_fixed_point(self, name):
        p = Tensor([1.5, -0.5], requires_grad=True)
        optimizer_step({'p': p}, {'p': np.zeros(2)}, OptimConfig(name, lr=0.1))
        np.testing.assert_array_equal(p.data, [1.5, -0.5])

    def test_missing_gradient(self):
        p, q = Tensor([1.0], requires_grad=True), Tensor([1.0], requires_grad=True)
        with pytest.raises(ConfigurationError):
            optimizer_step({'p': p, 'q': q}, {'p': np.ones(1)}, OptimConfig('sgd'))

    def test_quadratic_converges(self):
        w = Tensor([0.0], requires_grad=True)
        optimizer = SGD([('w', w)], lr=0.1)
        for _ in range(100):
            diff = w - 3.0
            F.sum(diff * diff).backward()
            optimizer.step()
            optimizer.zero_grad()
        assert abs(w.data[0] - 3.0) < 1e-6

    def test_adam_reduces_loss(self):
        w = Tensor([0.0, 0.0], requires_grad=True)
        optimizer = Adam([('w', w)], lr=0.1)
        target = np.array([1.0, -2.0])
        for _ in range(300):
            diff = w - Tensor(target)
            F.sum(diff * diff).backward()
            optimizer.step()
            optimizer.zero_grad()
        np.testing.assert_allclose(w.data, target, atol=5e-2)

    def test_cosine_schedule_warms_up(self):
        w = Tensor([0.0], requires_grad=True)
        optimizer = SGD([('w', w)], lr=1.0)
        scheduler = get_cosine_schedule_with_warmup(optimizer, 100, num_warmup_steps=10)
        assert optimizer.param_groups[0]['lr'] == 0.0
        for _ in range(10):
            scheduler.step()
        assert optimizer.param_groups[0]['lr'] == pytest.approx(1.0)

    def test_clip_grad_norm(self):
        w = Tensor([0.0, 0.0], requires_grad=True)
        F.sum(w * Tensor([3.0, 4.0])).backward()
        norm = clip_grad_norm([w], 1.0)
        assert norm == pytest.approx(5.0)
        np.testing.assert_allclose(w.grad, [0.6, 0.8])


def test_check_gradients_flags_wrong_gradient():
    w = Tensor([1.0, 2.0], requires_grad=True)

    class Broken(F.Function):
        def forward(self, a):
            return a * a

        def backward(self, grad):
            return (grad * self.inputs[0].data,)

    report = check_gradients(lambda: F.sum(Broken.apply(w)), [('w', w)])
    assert not report.passed
    assert 'FAIL' in report.format()


def test_item_needs_single_element():
    with pytest.raises(UsageError):
        Tensor([1.0, 2.0]).item()


class TestTorchCrossCheck:
    def test_conv2d(self):
        torch = pytest.importorskip('torch')
        rng = np.random.default_rng(6)
        x, kernel, bias = rng.normal(size=(2, 3, 9, 9)), rng.normal(size=(4, 3, 3, 3)), rng.normal(size=4)
        expected = torch.nn.functional.conv2d(torch.from_numpy(x), torch.from_numpy(kernel), torch.from_numpy(bias),
                                              stride=2).numpy()
        np.testing.assert_allclose(conv2d(x, kernel, bias, stride=2).data, expected, rtol=1e-10, atol=1e-12)

    def test_lstm_step(self):
        torch = pytest.importorskip('torch')
        rng = np.random.default_rng(7)
        m, n = 4, 3
        x, h, c = rng.normal(size=(2, n)), rng.normal(size=(2, m)), rng.normal(size=(2, m))
        w_ih, w_hh, bias = rng.normal(size=(4 * m, n)), rng.normal(size=(4 * m, m)), rng.normal(size=4 * m)
        cell = torch.nn.LSTMCell(n, m).double()
        with torch.no_grad():
            cell.weight_ih.copy_(torch.from_numpy(w_ih))
            cell.weight_hh.copy_(torch.from_numpy(w_hh))
            cell.bias_ih.copy_(torch.from_numpy(bias))
            cell.bias_hh.zero_()
            h_ref, c_ref = cell(torch.from_numpy(x), (torch.from_numpy(h), torch.from_numpy(c)))
        h_out, c_out = lstm_step(x, h, c, w_ih, w_hh, bias)
        np.testing.assert_allclose(h_out.data, h_ref.numpy(), rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(c_out.data, c_ref.numpy(), rtol=1e-10, atol=1e-12)
