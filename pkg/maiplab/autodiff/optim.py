# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from maiplab.errors import ConfigurationError


@dataclass
class OptimConfig:
    """
    first-order update rule.

    name: 'sgd' (optionally with momentum / nesterov) or 'adam' (bias corrected)
    """
    name: str = 'adam'
    lr: float = 3e-3
    momentum: float = 0.0
    nesterov: bool = False
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0


def optimizer_step(params, grads, config, state=None):
    """
    Update `params` in place with one step of the configured rule.

    Args:
        params: mapping name -> Tensor (trainable)
        grads: mapping name -> gradient array of the same shape
        config: OptimConfig
        state: per-parameter optimizer state from the previous call (None on the first step)
    Returns:
        the new state
    """
    name = config.name.lower()
    if name not in ('sgd', 'adam'):
        raise ConfigurationError(f"unknown optimizer {config.name!r}")
    missing = [k for k, p in params.items() if p.requires_grad and k not in grads]
    if missing:
        raise ConfigurationError(f"no gradient for trainable tensors: {', '.join(missing)}")
    state = {} if state is None else state
    for key, param in params.items():
        grad = np.asarray(grads[key], dtype=np.float64)
        if grad.shape != param.shape:
            raise ConfigurationError(f"gradient for {key} has shape {grad.shape}, parameter has {param.shape}")
        if config.weight_decay:
            grad = grad + config.weight_decay * param.data
        slot = state.setdefault(key, {'step': 0})
        slot['step'] += 1
        if name == 'sgd':
            if config.momentum:
                buf = slot.get('momentum_buffer')
                buf = grad.copy() if buf is None else config.momentum * buf + grad
                slot['momentum_buffer'] = buf
                grad = grad + config.momentum * buf if config.nesterov else buf
            param.data -= config.lr * grad
        else:
            beta1, beta2 = config.betas
            m = slot.get('exp_avg', np.zeros_like(grad))
            v = slot.get('exp_avg_sq', np.zeros_like(grad))
            m = beta1 * m + (1.0 - beta1) * grad
            v = beta2 * v + (1.0 - beta2) * grad * grad
            slot['exp_avg'], slot['exp_avg_sq'] = m, v
            m_hat = m / (1.0 - beta1 ** slot['step'])
            v_hat = v / (1.0 - beta2 ** slot['step'])
            param.data -= config.lr * m_hat / (np.sqrt(v_hat) + config.eps)
    return state


class Optimizer:
    """
    Stateful wrapper around `optimizer_step` with torch-style parameter groups.

    Args:
        named_params: iterable of (name, Tensor) or a list of group dicts
            {'params': [(name, Tensor), ...], **overrides}
        config: OptimConfig holding the defaults of every group
    """

    def __init__(self, named_params, config):
        self.config = config
        named_params = list(named_params)
        if named_params and isinstance(named_params[0], dict):
            groups = named_params
        else:
            groups = [{'params': named_params}]
        self.param_groups = []
        for group in groups:
            filled = dict(vars(config))
            filled.update({k: v for k, v in group.items() if k != 'params'})
            filled['params'] = [(n, p) for n, p in group['params'] if p.requires_grad]
            filled['initial_lr'] = filled['lr']
            self.param_groups.append(filled)
        self.state = {}

    def zero_grad(self):
        for group in self.param_groups:
            for _, p in group['params']:
                p.zero_grad()

    def step(self):
        for group in self.param_groups:
            params = dict(group['params'])
            grads = {n: p.grad for n, p in params.items() if p.has_grad}
            config = OptimConfig(**{k: group[k] for k in vars(self.config)})
            optimizer_step(params, grads, config, self.state)

    def state_dict(self):
        return {
            'state': {k: dict(v) for k, v in self.state.items()},
            'lr': [g['lr'] for g in self.param_groups],
        }

    def load_state_dict(self, state_dict):
        self.state = {k: dict(v) for k, v in state_dict['state'].items()}
        for group, lr in zip(self.param_groups, state_dict['lr']):
            group['lr'] = lr


def SGD(named_params, lr=0.1, momentum=0.0, weight_decay=0.0, nesterov=False):
    return Optimizer(named_params, OptimConfig('sgd', lr=lr, momentum=momentum,
                                               nesterov=nesterov, weight_decay=weight_decay))


def Adam(named_params, lr=3e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=0.0):
    return Optimizer(named_params, OptimConfig('adam', lr=lr, betas=tuple(betas), eps=eps,
                                               weight_decay=weight_decay))


class LambdaLR:
    """
    Sets the learning rate of each group to initial_lr * lr_lambda(step).
    """

    def __init__(self, optimizer, lr_lambda, last_epoch=-1):
        self.optimizer = optimizer
        self.lr_lambda = lr_lambda
        self.last_epoch = last_epoch
        self.step()

    def get_last_lr(self):
        return [g['lr'] for g in self.optimizer.param_groups]

    def step(self):
        self.last_epoch += 1
        factor = self.lr_lambda(self.last_epoch)
        for group in self.optimizer.param_groups:
            group['lr'] = group['initial_lr'] * factor

    def state_dict(self):
        return {'last_epoch': self.last_epoch}

    def load_state_dict(self, state_dict):
        self.last_epoch = state_dict['last_epoch'] - 1
        self.step()


def get_cosine_schedule_with_warmup(optimizer,
                                    num_training_steps,
                                    num_cycles=7. / 16.,
                                    num_warmup_steps=0,
                                    last_epoch=-1):
    '''
    Get cosine scheduler (LambdaLR).
    if warmup is needed, set num_warmup_steps (int) > 0.
    '''

    def _lr_lambda(current_step):
        if current_step < num_warmup_steps:
            _lr = float(current_step) / float(max(1, num_warmup_steps))
        else:
            num_cos_steps = float(current_step - num_warmup_steps)
            num_cos_steps = num_cos_steps / float(max(1, num_training_steps - num_warmup_steps))
            _lr = max(0.0, math.cos(math.pi * num_cycles * num_cos_steps))
        return _lr

    return LambdaLR(optimizer, _lr_lambda, last_epoch)


def clip_grad_norm(params, max_norm):
    """
    scale gradients in place so their global L2 norm is at most max_norm; returns the norm before clipping
    """
    grads = [p.grad for p in params if p.grad is not None and p.has_grad]
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            g *= scale
    return total
