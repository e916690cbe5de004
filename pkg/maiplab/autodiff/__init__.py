# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .tensor import Tensor, Function, ComputeGraph, backward, no_grad, is_grad_enabled, as_tensor
from .functional import (conv2d, dense, lstm_step, tanh, sigmoid, relu, softplus, exp, log, wrap_angle,
                         concat, reshape, flatten, expand, stack_last, square)
from .optim import (OptimConfig, Optimizer, SGD, Adam, LambdaLR, optimizer_step,
                    get_cosine_schedule_with_warmup, clip_grad_norm)
from .gradcheck import check_gradients, num_grad, GradCheckReport
