# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import argparse
from dataclasses import dataclass
from typing import Optional

import numpy as np

from maiplab.autodiff import functional as F
from maiplab.autodiff import Tensor, as_tensor
from maiplab.errors import ShapeError


class AverageMeter(object):
    """
    refer: https://github.com/pytorch/examples/blob/master/imagenet/main.py
    """

    def __init__(self):
        self.reset()

    def reset(self):
        self.val = 0
        self.avg = 0
        self.sum = 0
        self.count = 0

    def update(self, val, n=1):
        self.val = val
        self.sum += val * n
        self.count += n
        self.avg = self.sum / self.count


class Argument(object):
    """
    Algorithm specific argument
    """
    def __init__(self, name, type, default, help=''):
        """
        Model specific arguments should be added via this class.
        """
        self.name = name
        self.type = type
        self.default = default
        self.help = help


def str2bool(v):
    """
    str to bool
    """
    if isinstance(v, bool):
        return v
    if v.lower() in ('yes', 'true', 't', 'y', '1'):
        return True
    elif v.lower() in ('no', 'false', 'f', 'n', '0'):
        return False
    else:
        raise argparse.ArgumentTypeError('Boolean value expected.')


def kl_divergence(mu, logvar):
    """
    KL[N(mu, exp(logvar)) || N(0, I)] = 1/2 sum_d (mu^2 + exp(logvar) - 1 - logvar)

    For batched [B, d] inputs the per-sample divergences are averaged.
    """
    mu, logvar = as_tensor(mu), as_tensor(logvar)
    if mu.shape != logvar.shape:
        raise ShapeError('kl_divergence', f"logvar of shape {mu.shape}", logvar.shape)
    kl = F.sum(mu * mu + F.exp(logvar) - 1.0 - logvar) * 0.5
    if mu.ndim == 2:
        kl = kl / float(mu.shape[0])
    return kl


def wrapped_squared_error(y_hat, y, scale=None):
    """
    Squared error of (v, theta) sequences with theta differences wrapped to
    [-180, 180) before squaring, summed over the horizon and averaged over the
    batch.

    Args:
        y_hat: Tensor [B, Tp, 2] or [Tp, 2]
        y: array of the same shape
        scale: optional (v_scale, theta_scale) dividing each component after wrapping
    """
    y_hat = as_tensor(y_hat)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != y_hat.shape:
        raise ShapeError('loss', f"y of shape {y_hat.shape}", y.shape)
    diff = y_hat - Tensor(y)
    dv = diff[..., 0]
    dtheta = F.wrap_angle(diff[..., 1])
    if scale is not None:
        dv = dv * (1.0 / scale[0])
        dtheta = dtheta * (1.0 / scale[1])
    total = F.sum(dv * dv) + F.sum(dtheta * dtheta)
    if y.ndim == 3:
        total = total / float(y.shape[0])
    return total


def cvae_loss(y_hat, y, mu, logvar, beta, scale=None):
    """
    ||Y - Y_hat||^2 + beta * KL

    Returns:
        (total, reconstruction, kl) tensors; kl is None for deterministic heads
    """
    recon = wrapped_squared_error(y_hat, y, scale)
    if mu is None:
        return recon, recon, None
    kl = kl_divergence(mu, logvar)
    return recon + kl * float(beta), recon, kl


@dataclass
class PredictionSample:
    """
    One sampled future of one vehicle: Tp speeds (m/s) and yaw angles (degrees),
    with the latent draw that produced it (None for deterministic predictors).
    """
    v: np.ndarray
    theta: np.ndarray
    z: Optional[np.ndarray] = None

    @property
    def tp(self):
        return len(self.v)

    def as_array(self):
        return np.stack([self.v, self.theta], axis=-1)

    @classmethod
    def from_array(cls, y, z=None):
        y = np.asarray(y, dtype=np.float64)
        return cls(v=y[:, 0].copy(), theta=y[:, 1].copy(), z=None if z is None else np.asarray(z).copy())
