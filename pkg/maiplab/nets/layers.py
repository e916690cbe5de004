# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import numpy as np

from maiplab.autodiff import functional as F
from maiplab.autodiff import Tensor
from maiplab.nets.module import Module, Parameter, uniform_init


class Linear(Module):
    def __init__(self, in_features, out_features, rng, activation='tanh'):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.activation = activation
        F.get_activation(activation)
        self.weight = Parameter(uniform_init(rng, (out_features, in_features), in_features))
        self.bias = Parameter(uniform_init(rng, (out_features,), in_features))

    def forward(self, x):
        return F.dense(x, self.weight, self.bias, self.activation)


class Conv2d(Module):
    def __init__(self, in_channels, out_channels, rng, kernel_size=3, stride=2):
        super().__init__()
        self.stride = stride
        self.kernel_size = kernel_size
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Parameter(uniform_init(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in))
        self.bias = Parameter(uniform_init(rng, (out_channels,), fan_in))

    def forward(self, x):
        return F.conv2d(x, self.weight, self.bias, stride=self.stride)

    def output_size(self, size):
        return (size - self.kernel_size) // self.stride + 1


class ConvEncoder(Module):
    """
    conv -> tanh -> conv -> tanh -> flatten, mapping [B, C, R, R] to [B, features]
    """

    def __init__(self, in_channels, grid_size, rng, channels=(4, 8), stride=2):
        super().__init__()
        self.convs = []
        size, prev = grid_size, in_channels
        for k, ch in enumerate(channels):
            conv = Conv2d(prev, ch, rng, stride=stride)
            setattr(self, f'conv{k + 1}', conv)
            self.convs.append(conv)
            size = conv.output_size(size)
            prev = ch
        self.out_features = prev * size * size

    def forward(self, x):
        for conv in self.convs:
            x = F.tanh(conv(x))
        return F.flatten(x)


class LSTMCell(Module):
    def __init__(self, input_size, hidden_size, rng):
        super().__init__()
        self.hidden_size = hidden_size
        self.weight_ih = Parameter(uniform_init(rng, (4 * hidden_size, input_size), hidden_size))
        self.weight_hh = Parameter(uniform_init(rng, (4 * hidden_size, hidden_size), hidden_size))
        self.bias = Parameter(uniform_init(rng, (4 * hidden_size,), hidden_size))

    def forward(self, x, h, c):
        return F.lstm_step(x, h, c, self.weight_ih, self.weight_hh, self.bias)


class LSTM(Module):
    """
    runs an LSTMCell over [B, T, n] from zero state and returns the last hidden state [B, m]
    """

    def __init__(self, input_size, hidden_size, rng):
        super().__init__()
        self.cell = LSTMCell(input_size, hidden_size, rng)

    def forward(self, seq):
        batch, steps = seq.shape[0], seq.shape[1]
        h = Tensor(np.zeros((batch, self.cell.hidden_size)))
        c = Tensor(np.zeros((batch, self.cell.hidden_size)))
        for t in range(steps):
            h, c = self.cell(seq[:, t, :], h, c)
        return h
