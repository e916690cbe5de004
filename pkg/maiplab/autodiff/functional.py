# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Differentiable operations on `Tensor`.

Shapes are never broadcast implicitly: elementwise binary ops take equal shapes
or one scalar operand, and batch handling is explicit in `dense`, `conv2d` and
`expand`.
"""

import numpy as np

from maiplab.errors import ShapeError
from maiplab.autodiff.tensor import Function, as_tensor


def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


class Exp(Function):
    def forward(self, a):
        self.out = np.exp(a)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, a):
        self.a = a
        return np.log(a)

    def backward(self, grad):
        return (grad / self.a,)


class Tanh(Function):
    def forward(self, a):
        self.out = np.tanh(a)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out * self.out),)


class Sigmoid(Function):
    def forward(self, a):
        # 0.5 * (1 + tanh(a / 2)) stays finite for large |a|
        self.out = 0.5 * (1.0 + np.tanh(0.5 * a))
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Relu(Function):
    def forward(self, a):
        self.mask = a > 0
        return np.where(self.mask, a, 0.0)

    def backward(self, grad):
        return (grad * self.mask,)


class Softplus(Function):
    def forward(self, a):
        self.a = a
        return np.logaddexp(0.0, a)

    def backward(self, grad):
        return (grad * 0.5 * (1.0 + np.tanh(0.5 * self.a)),)


class WrapAngle(Function):
    """wrap degrees to [-180, 180); the offset is piecewise constant so the gradient is identity"""

    def forward(self, a):
        return np.mod(a + 180.0, 360.0) - 180.0

    def backward(self, grad):
        return (grad,)


class Sum(Function):
    def forward(self, a, axis=None):
        self.shape = a.shape
        self.axis = _norm_axis(axis, a.ndim)
        return np.asarray(a.sum(axis=self.axis))

    def backward(self, grad):
        return (np.broadcast_to(np.expand_dims(grad, self.axis), self.shape).copy(),)


class Mean(Function):
    def forward(self, a, axis=None):
        self.shape = a.shape
        self.axis = _norm_axis(axis, a.ndim)
        self.count = int(np.prod([a.shape[i] for i in self.axis])) if self.axis else 1
        return np.asarray(a.mean(axis=self.axis))

    def backward(self, grad):
        grad = np.expand_dims(grad, self.axis) / self.count
        return (np.broadcast_to(grad, self.shape).copy(),)


class Reshape(Function):
    def forward(self, a, shape=None):
        self.shape = a.shape
        try:
            return a.reshape(shape)
        except ValueError:
            raise ShapeError('reshape', f"a shape with {a.size} elements", (a.shape, shape)) from None

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class GetItem(Function):
    def forward(self, a, index=None):
        self.shape = a.shape
        self.index = index
        return np.array(a[index])

    def backward(self, grad):
        out = np.zeros(self.shape)
        index = self.index if isinstance(self.index, tuple) else (self.index,)
        if all(isinstance(i, (slice, int, type(Ellipsis))) or i is None for i in index):
            out[self.index] += grad
        else:
            np.add.at(out, self.index, grad)
        return (out,)


class Concat(Function):
    def forward(self, *arrays, axis=0):
        ref = arrays[0]
        axis = axis % ref.ndim
        for arr in arrays[1:]:
            if arr.ndim != ref.ndim or any(arr.shape[i] != ref.shape[i] for i in range(ref.ndim) if i != axis):
                raise ShapeError('concat', f"shapes matching off axis {axis}", tuple(a.shape for a in arrays))
        self.axis = axis
        self.splits = np.cumsum([arr.shape[axis] for arr in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Expand(Function):
    """repeat a tensor along a new leading batch axis"""

    def forward(self, a, n=1):
        return np.broadcast_to(a[None], (n,) + a.shape).copy()

    def backward(self, grad):
        return (grad.sum(axis=0),)


class Dense(Function):
    def forward(self, x, weight, bias=None):
        if weight.ndim != 2 or x.ndim not in (1, 2) or x.shape[-1] != weight.shape[1]:
            raise ShapeError('dense', f"x[..., {weight.shape[1] if weight.ndim == 2 else '?'}] with W[m, n]",
                             (x.shape, weight.shape))
        if bias is not None and bias.shape != (weight.shape[0],):
            raise ShapeError('dense', f"bias of shape ({weight.shape[0]},)", bias.shape)
        self.x, self.weight, self.has_bias = x, weight, bias is not None
        out = x @ weight.T
        if bias is not None:
            out = out + bias
        return out

    def backward(self, grad):
        gx = grad @ self.weight
        if self.x.ndim == 1:
            gw = np.outer(grad, self.x)
            gb = grad
        else:
            gw = grad.T @ self.x
            gb = grad.sum(axis=0)
        return (gx, gw, gb) if self.has_bias else (gx, gw)


class Conv2d(Function):
    """
    valid cross-correlation, input [B, C, H, W], kernel [K, C, kh, kw]
    """

    def forward(self, x, kernel, bias, stride=1):
        if x.ndim != 4 or kernel.ndim != 4 or x.shape[1] != kernel.shape[1]:
            raise ShapeError('conv2d', "input [B, C, H, W] and kernel [K, C, kh, kw]", (x.shape, kernel.shape))
        if bias.shape != (kernel.shape[0],):
            raise ShapeError('conv2d', f"bias of shape ({kernel.shape[0]},)", bias.shape)
        kh, kw = kernel.shape[2:]
        H, W = x.shape[2:]
        if H < kh or W < kw:
            raise ShapeError('conv2d', f"spatial extent at least {kh}x{kw}", x.shape)
        ho = (H - kh) // stride + 1
        wo = (W - kw) // stride + 1
        self.x, self.kernel, self.stride, self.out_hw = x, kernel, stride, (ho, wo)

        out = np.zeros((x.shape[0], kernel.shape[0], ho, wo))
        for i in range(kh):
            for j in range(kw):
                patch = x[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
                out += np.einsum('bchw,kc->bkhw', patch, kernel[:, :, i, j])
        return out + bias[None, :, None, None]

    def backward(self, grad):
        x, kernel, s = self.x, self.kernel, self.stride
        ho, wo = self.out_hw
        gx = np.zeros_like(x)
        gk = np.zeros_like(kernel)
        for i in range(kernel.shape[2]):
            for j in range(kernel.shape[3]):
                rows = slice(i, i + s * (ho - 1) + 1, s)
                cols = slice(j, j + s * (wo - 1) + 1, s)
                gk[:, :, i, j] = np.einsum('bkhw,bchw->kc', grad, x[:, :, rows, cols])
                gx[:, :, rows, cols] += np.einsum('bkhw,kc->bchw', grad, kernel[:, :, i, j])
        return gx, gk, grad.sum(axis=(0, 2, 3))


# -- functional wrappers -------------------------------------------------

def exp(x):
    return Exp.apply(x)


def log(x):
    return Log.apply(x)


def tanh(x):
    return Tanh.apply(x)


def sigmoid(x):
    return Sigmoid.apply(x)


def relu(x):
    return Relu.apply(x)


def softplus(x):
    return Softplus.apply(x)


def identity(x):
    return x


def wrap_angle(x):
    return WrapAngle.apply(x)


def square(x):
    x = as_tensor(x)
    return x * x


def sum(x, axis=None):
    return Sum.apply(x, axis=axis)


def mean(x, axis=None):
    return Mean.apply(x, axis=axis)


def reshape(x, shape):
    return Reshape.apply(x, shape=tuple(shape))


def flatten(x):
    """[B, ...] -> [B, prod(...)]"""
    x = as_tensor(x)
    return reshape(x, (x.shape[0], -1))


def getitem(x, index):
    return GetItem.apply(x, index=index)


def concat(tensors, axis=0):
    return Concat.apply(*tensors, axis=axis)


def stack_last(tensors):
    """stack same-shape tensors along a new trailing axis"""
    return concat([reshape(t, as_tensor(t).shape + (1,)) for t in tensors], axis=-1)


def expand(x, n):
    return Expand.apply(x, n=int(n))


ACTIVATIONS = {
    'identity': identity,
    'tanh': tanh,
    'relu': relu,
    'sigmoid': sigmoid,
    'softplus': softplus,
}


def get_activation(name):
    if name not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}, expected one of {sorted(ACTIVATIONS)}")
    return ACTIVATIONS[name]


def dense(x, weight, bias=None, activation='identity'):
    """
    g(W x + b) for x of shape [n] or a batch [B, n].
    """
    args = (x, weight) if bias is None else (x, weight, bias)
    return get_activation(activation)(Dense.apply(*args))


def conv2d(x, kernel, bias, stride=1):
    """
    Valid 2-d cross-correlation.

    Args:
        x: input of shape [C, H, W] or a batch [B, C, H, W]
        kernel: [K, C, kh, kw]
        bias: [K]
        stride: 1 or 2
    Returns:
        [K, H', W'] (or [B, K, H', W']) with H' = (H - kh) // stride + 1
    """
    if stride not in (1, 2):
        raise ValueError(f"conv2d stride must be 1 or 2, got {stride}")
    x = as_tensor(x)
    if x.ndim == 3:
        out = Conv2d.apply(reshape(x, (1,) + x.shape), kernel, bias, stride=stride)
        return reshape(out, out.shape[1:])
    return Conv2d.apply(x, kernel, bias, stride=stride)


def lstm_step(x, h, c, w_ih, w_hh, bias):
    """
    One LSTM cell update with gates ordered (input, forget, candidate, output).

    Args:
        x: [n] or [B, n]
        h, c: [m] or [B, m]
        w_ih: [4m, n], w_hh: [4m, m], bias: [4m]
    Returns:
        (h', c')
    """
    h, c = as_tensor(h), as_tensor(c)
    m = h.shape[-1]
    if c.shape != h.shape or as_tensor(w_hh).shape != (4 * m, m):
        raise ShapeError('lstm_step', f"h, c of width {m} and w_hh [{4 * m}, {m}]",
                         (h.shape, c.shape, as_tensor(w_hh).shape))
    gates = Dense.apply(x, w_ih, bias) + Dense.apply(h, w_hh)
    i = sigmoid(gates[..., 0:m])
    f = sigmoid(gates[..., m:2 * m])
    g = tanh(gates[..., 2 * m:3 * m])
    o = sigmoid(gates[..., 3 * m:4 * m])
    c_next = f * c + i * g
    h_next = o * tanh(c_next)
    return h_next, c_next


