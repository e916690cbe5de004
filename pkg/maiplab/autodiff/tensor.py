# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import threading
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from maiplab.errors import ShapeError, UsageError


_grad_state = threading.local()


def is_grad_enabled():
    return getattr(_grad_state, 'enabled', True)


class no_grad:
    """
    Context manager disabling graph recording on the current thread.
    """

    def __enter__(self):
        self.prev = is_grad_enabled()
        _grad_state.enabled = False
        return self

    def __exit__(self, *exc):
        _grad_state.enabled = self.prev
        return False


def as_tensor(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


class Function:
    """
    Base class for differentiable operations.

    Subclasses implement `forward` on numpy arrays and `backward`, which maps the
    gradient w.r.t. the output to a tuple with one gradient (or None) per input.
    Anything needed by `backward` is stored on the instance during `forward`.
    """

    def __init__(self, *inputs):
        self.inputs = inputs

    @property
    def name(self):
        return type(self).__name__

    def forward(self, *arrays, **kwargs):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    @classmethod
    def apply(cls, *inputs, **kwargs):
        inputs = tuple(as_tensor(x) for x in inputs)
        fn = cls(*inputs)
        out = fn.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
        return Tensor(out, requires_grad=requires_grad, _creator=fn if requires_grad else None)


def _broadcast_scalar(op, a, b):
    # elementwise ops accept equal shapes or a 0-d operand on either side
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(op, "equal shapes or a scalar operand", (a.shape, b.shape))


def _reduce_like(grad, shape):
    if shape == () and grad.shape != ():
        return np.asarray(grad.sum())
    return grad


class Add(Function):
    def forward(self, a, b):
        _broadcast_scalar('add', a, b)
        self.shapes = (a.shape, b.shape)
        return a + b

    def backward(self, grad):
        return _reduce_like(grad, self.shapes[0]), _reduce_like(grad, self.shapes[1])


class Sub(Function):
    def forward(self, a, b):
        _broadcast_scalar('sub', a, b)
        self.shapes = (a.shape, b.shape)
        return a - b

    def backward(self, grad):
        return _reduce_like(grad, self.shapes[0]), _reduce_like(-grad, self.shapes[1])


class Mul(Function):
    def forward(self, a, b):
        _broadcast_scalar('mul', a, b)
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return _reduce_like(grad * self.b, self.a.shape), _reduce_like(grad * self.a, self.b.shape)


class Div(Function):
    def forward(self, a, b):
        _broadcast_scalar('div', a, b)
        self.a, self.b = a, b
        return a / b

    def backward(self, grad):
        ga = grad / self.b
        gb = -grad * self.a / (self.b * self.b)
        return _reduce_like(ga, self.a.shape), _reduce_like(gb, self.b.shape)


class Neg(Function):
    def forward(self, a):
        return -a

    def backward(self, grad):
        return (-grad,)


class Tensor:
    """
    n-dimensional float64 array that records the operations applied to it.

    Leaf tensors created with `requires_grad=True` own a gradient buffer of the
    same shape (`grad`) which `backward` accumulates into. Interior tensors keep
    a reference to the `Function` that produced them until the graph is released.
    """
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None, _creator=None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._creator = _creator
        self.grad = np.zeros_like(self.data) if self.requires_grad and _creator is None else None
        self.has_grad = False

    # -- array protocol ---------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def values(self):
        """values in row-major order"""
        return self.data.reshape(-1)

    @property
    def is_leaf(self):
        return self._creator is None

    def numpy(self):
        return self.data

    def item(self):
        if self.size != 1:
            raise UsageError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        if self.grad is not None:
            self.grad.fill(0.0)
        self.has_grad = False

    def __repr__(self):
        label = f", name={self.name!r}" if self.name else ''
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    # -- operators --------------------------------------------------------
    def __add__(self, other):
        return Add.apply(self, other)

    def __radd__(self, other):
        return Add.apply(other, self)

    def __sub__(self, other):
        return Sub.apply(self, other)

    def __rsub__(self, other):
        return Sub.apply(other, self)

    def __mul__(self, other):
        return Mul.apply(self, other)

    def __rmul__(self, other):
        return Mul.apply(other, self)

    def __truediv__(self, other):
        return Div.apply(self, other)

    def __rtruediv__(self, other):
        return Div.apply(other, self)

    def __neg__(self):
        return Neg.apply(self)

    def __getitem__(self, index):
        from maiplab.autodiff.functional import getitem
        return getitem(self, index)

    def reshape(self, *shape):
        from maiplab.autodiff.functional import reshape
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None):
        from maiplab.autodiff.functional import sum as _sum
        return _sum(self, axis)

    def mean(self, axis=None):
        from maiplab.autodiff.functional import mean
        return mean(self, axis)

    def backward(self, retain_graph=False):
        return backward(self, retain_graph=retain_graph)


@dataclass
class GraphNode:
    op: str
    input_ids: Tuple[int, ...]
    output_id: int
    output: Tensor


@dataclass
class ComputeGraph:
    """
    Operations reachable from one output, in topological order (inputs first).
    """
    nodes: List[GraphNode] = field(default_factory=list)

    @classmethod
    def from_output(cls, output):
        graph = cls()
        visited = set()
        stack = [(output, False)]
        while stack:
            tensor, expanded = stack.pop()
            if tensor._creator is None:
                continue
            if expanded:
                fn = tensor._creator
                graph.nodes.append(GraphNode(fn.name, tuple(id(t) for t in fn.inputs), id(tensor), tensor))
                continue
            if id(tensor) in visited:
                continue
            visited.add(id(tensor))
            stack.append((tensor, True))
            for inp in reversed(tensor._creator.inputs):
                if inp._creator is not None and id(inp) not in visited:
                    stack.append((inp, False))
        return graph

    def release(self):
        for node in self.nodes:
            node.output._creator = None
        self.nodes = []


def backward(loss, retain_graph=False):
    """
    Reverse-mode differentiation of a scalar `loss`.

    Gradients are accumulated into the `grad` buffer of every leaf tensor that
    requires grad. The recorded graph is released afterwards unless
    `retain_graph` is set, in which case `backward` may run again on it.

    Returns:
        dict mapping each reached leaf tensor to its gradient array
    """
    loss = as_tensor(loss)
    if loss.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise UsageError("backward on a tensor that does not require grad")

    leaves: Dict[int, Tensor] = {}
    if loss._creator is None:
        loss.grad += 1.0
        loss.has_grad = True
        return {loss: loss.grad}

    graph = ComputeGraph.from_output(loss)
    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(graph.nodes):
        grad = pending.pop(node.output_id, None)
        if grad is None:
            continue
        fn = node.output._creator
        for inp, g in zip(fn.inputs, fn.backward(grad)):
            if g is None or not inp.requires_grad:
                continue
            if inp._creator is None:
                inp.grad += g
                inp.has_grad = True
                leaves[id(inp)] = inp
            elif id(inp) in pending:
                pending[id(inp)] = pending[id(inp)] + g
            else:
                pending[id(inp)] = g

    if not retain_graph:
        graph.release()
    return {t: t.grad for t in leaves.values()}
