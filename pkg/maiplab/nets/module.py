# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from collections import OrderedDict

import numpy as np

from maiplab.autodiff import Tensor
from maiplab.errors import ConfigurationError


class Parameter(Tensor):
    """trainable leaf tensor"""

    def __init__(self, data, name=None):
        super().__init__(data, requires_grad=True, name=name)


def uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Module:
    """
    Parameter / sub-module registry in the torch.nn.Module manner.

    Attributes holding a `Parameter` or a `Module` are registered in assignment
    order, which fixes the order of `named_parameters` and of checkpoints.
    """

    def __init__(self):
        object.__setattr__(self, '_parameters', OrderedDict())
        object.__setattr__(self, '_modules', OrderedDict())
        object.__setattr__(self, 'training', True)

    def __setattr__(self, key, value):
        if isinstance(value, Parameter):
            self._parameters[key] = value
        elif isinstance(value, Module):
            self._modules[key] = value
        object.__setattr__(self, key, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix=''):
        for name, p in self._parameters.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + '.')

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def named_modules(self, prefix=''):
        yield prefix, self
        for name, m in self._modules.items():
            yield from m.named_modules(f"{prefix}.{name}" if prefix else name)

    def train(self, mode=True):
        for _, m in self.named_modules():
            object.__setattr__(m, 'training', mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state_dict, strict=True):
        own = OrderedDict(self.named_parameters())
        missing = [k for k in own if k not in state_dict]
        unexpected = [k for k in state_dict if k not in own]
        if strict and (missing or unexpected):
            raise ConfigurationError(f"state dict mismatch, missing: {missing}, unexpected: {unexpected}")
        for name, p in own.items():
            if name not in state_dict:
                continue
            value = np.asarray(state_dict[name], dtype=np.float64)
            if value.shape != p.shape:
                raise ConfigurationError(f"{name}: checkpoint shape {value.shape} != parameter shape {p.shape}")
            p.data[...] = value
        return missing, unexpected
