# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from dataclasses import dataclass, field, asdict
from typing import Optional, Tuple

import numpy as np

from maiplab.autodiff import functional as F
from maiplab.autodiff import Tensor, as_tensor
from maiplab.errors import ShapeError, UsageError
from maiplab.nets.layers import ConvEncoder, Linear, LSTM
from maiplab.nets.module import Module


# x, y, theta, v, a, then the light one-hot
X4_SCALE = (50.0, 50.0, 180.0, 12.0, 3.0, 1.0, 1.0, 1.0)


@dataclass
class NetConfig:
    grid_size: int = 50
    th: int = 5
    tp: int = 5
    latent_dim: int = 2
    cnn_channels: Tuple[int, ...] = (4, 8)
    cnn_stride: int = 2
    branch_dim: int = 8
    fuse_dim: int = 16
    lstm_hidden: int = 16
    cvae_hidden: int = 16
    x4_dim: int = 8
    x4_encoder: str = 'lstm'
    cvae: bool = True
    map_history: str = 'last'
    use_mask: bool = True
    v_scale: float = 12.0
    theta_scale: float = 180.0
    x4_scale: Tuple[float, ...] = field(default=X4_SCALE)

    def to_dict(self):
        d = asdict(self)
        d['cnn_channels'] = list(self.cnn_channels)
        d['x4_scale'] = list(self.x4_scale)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for key in ('cnn_channels', 'x4_scale'):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)

    @property
    def map_channels(self):
        return self.th if self.map_history == 'stacked' else 1


@dataclass
class Group1Features:
    """environment features shared by every vehicle of a scene"""
    f1: Tensor
    f2: Optional[Tensor] = None


class MAIPNet(Module):
    """
    Two-group feature fusion followed by a CVAE over the (v, theta) future.

    Group 1 (shared): static map X1 through CNN1 -> FC1 (and the dynamic map X2
    through CNN2 -> FC2 when masking is off). Group 2 (per vehicle): masked X2
    through CNN2 -> FC2, the vehicle map X3 through CNN3 -> FC3 and the state
    history X4 through an LSTM (or an FC layer) -> FC4. The branches are summed
    and passed through FC5 to give Xout.

    With `cvae=False` the decoder reads Xout only and the network is a
    deterministic regressor.
    """

    def __init__(self, config=None, seed=0):
        super().__init__()
        self.config = config = config or NetConfig()
        if config.x4_encoder not in ('lstm', 'fc'):
            raise ValueError(f"x4_encoder must be 'lstm' or 'fc', got {config.x4_encoder!r}")
        if config.map_history not in ('last', 'stacked'):
            raise ValueError(f"map_history must be 'last' or 'stacked', got {config.map_history!r}")
        rng = np.random.default_rng(seed)
        d = config.branch_dim

        self.cnn1 = ConvEncoder(1, config.grid_size, rng, config.cnn_channels, config.cnn_stride)
        self.fc1 = Linear(self.cnn1.out_features, d, rng)
        self.cnn2 = ConvEncoder(config.map_channels, config.grid_size, rng, config.cnn_channels, config.cnn_stride)
        self.fc2 = Linear(self.cnn2.out_features, d, rng)
        self.cnn3 = ConvEncoder(config.map_channels, config.grid_size, rng, config.cnn_channels, config.cnn_stride)
        self.fc3 = Linear(self.cnn3.out_features, d, rng)
        if config.x4_encoder == 'lstm':
            self.lstm = LSTM(config.x4_dim, config.lstm_hidden, rng)
        else:
            self.x4_fc = Linear(config.th * config.x4_dim, config.lstm_hidden, rng)
        self.fc4 = Linear(config.lstm_hidden, d, rng)
        self.fc5 = Linear(d, config.fuse_dim, rng)

        h = config.cvae_hidden
        if config.cvae:
            self.enc1 = Linear(config.fuse_dim + 2 * config.tp, h, rng)
            self.enc2 = Linear(h, h, rng)
            self.enc_mu = Linear(h, config.latent_dim, rng, activation='identity')
            self.enc_logvar = Linear(h, config.latent_dim, rng, activation='identity')
            self.dec1 = Linear(config.latent_dim + config.fuse_dim, h, rng)
        else:
            self.dec1 = Linear(config.fuse_dim, h, rng)
        self.dec2 = Linear(h, h, rng)
        self.dec_out = Linear(h, 2 * config.tp, rng, activation='identity')

    # -- feature fusion ---------------------------------------------------
    def _check_map(self, name, x):
        c = self.config
        expected = (c.map_channels if name != 'x1' else 1, c.grid_size, c.grid_size)
        if x.ndim != 4 or x.shape[1:] != expected:
            raise ShapeError('fuse_features', f"{name} of shape [B, {expected[0]}, {c.grid_size}, {c.grid_size}]",
                             x.shape)

    def group1(self, x1, x2=None):
        """
        Shared environment features. X1 is identical for every sample of a scene,
        so only its first entry is encoded.
        """
        x1 = np.asarray(x1, dtype=np.float64)
        self._check_map('x1', x1)
        f1 = self.fc1(self.cnn1(Tensor(x1[:1])))
        f2 = None
        if not self.config.use_mask and x2 is not None:
            x2 = np.asarray(x2, dtype=np.float64)
            self._check_map('x2', x2)
            f2 = self.fc2(self.cnn2(Tensor(x2[:1])))
        return Group1Features(f1, f2)

    def encode_x4(self, x4):
        c = self.config
        x4 = np.asarray(x4, dtype=np.float64)
        if x4.ndim != 3 or x4.shape[1:] != (c.th, c.x4_dim):
            raise ShapeError('fuse_features', f"x4 of shape [B, {c.th}, {c.x4_dim}]", x4.shape)
        seq = Tensor(x4 / np.asarray(c.x4_scale))
        if c.x4_encoder == 'lstm':
            hidden = self.lstm(seq)
        else:
            hidden = self.x4_fc(F.flatten(seq))
        return self.fc4(hidden)

    def fuse_features(self, x1, x2, x3, x4, group1=None):
        """
        Xout = g(W5 (f1 + f2 + f3 + f4) + b5)

        Args:
            x1: static map [1, 1, R, R]
            x2: masked dynamic maps [B, C, R, R]
            x3: vehicle maps [B, C, R, R]
            x4: raw state histories [B, Th, 8]
            group1: precomputed `Group1Features` (computed here when None)
        Returns:
            Tensor [B, fuse_dim]
        """
        x2 = np.asarray(x2, dtype=np.float64)
        x3 = np.asarray(x3, dtype=np.float64)
        self._check_map('x2', x2)
        self._check_map('x3', x3)
        batch = x2.shape[0]
        if x3.shape[0] != batch or np.shape(x4)[0] != batch:
            raise ShapeError('fuse_features', "equal batch sizes for x2, x3, x4",
                             (x2.shape, x3.shape, np.shape(x4)))
        if group1 is None:
            group1 = self.group1(x1)

        f1 = F.expand(group1.f1[0], batch)
        if group1.f2 is not None:
            f2 = F.expand(group1.f2[0], batch)
        else:
            f2 = self.fc2(self.cnn2(Tensor(x2)))
        f3 = self.fc3(self.cnn3(Tensor(x3)))
        f4 = self.encode_x4(x4)
        return self.fc5(f1 + f2 + f3 + f4)

    # -- CVAE -------------------------------------------------------------
    def normalize_y(self, y):
        c = self.config
        y = np.asarray(y, dtype=np.float64)
        if y.shape[1:] != (c.tp, 2):
            raise ShapeError('encode_latent', f"y of shape [B, {c.tp}, 2]", y.shape)
        return y / np.array([c.v_scale, c.theta_scale])

    def encode_latent(self, xout, y):
        """
        Posterior parameters (mu, logvar) of z given Xout and the ground-truth future.
        Only available in training mode; prediction uses the decoder alone.
        """
        if not self.config.cvae:
            raise UsageError("deterministic network has no latent encoder")
        if not self.training:
            raise UsageError("encode_latent is a training-time operation; prediction samples z from the prior")
        y = self.normalize_y(y).reshape(np.shape(y)[0], -1)
        h = self.enc2(self.enc1(F.concat([xout, Tensor(y)], axis=1)))
        return self.enc_mu(h), self.enc_logvar(h)

    def decode(self, z, xout):
        """
        Decode (z, Xout) into [B, Tp, 2] pairs (v, theta); v >= 0 through softplus.
        """
        c = self.config
        xout = as_tensor(xout)
        if c.cvae:
            z = as_tensor(z)
            if z.ndim != 2 or z.shape[1] != c.latent_dim:
                raise ShapeError('decode', f"z of shape [B, {c.latent_dim}]", z.shape)
            h = self.dec1(F.concat([z, xout], axis=1))
        else:
            h = self.dec1(xout)
        out = F.reshape(self.dec_out(self.dec2(h)), (xout.shape[0], c.tp, 2))
        v = F.softplus(out[..., 0]) * c.v_scale
        theta = out[..., 1] * c.theta_scale
        return F.stack_last([v, theta])

    def forward(self, x1, x2, x3, x4, y=None, eps=None):
        """
        training forward pass; returns the decoded future and the posterior parameters
        """
        xout = self.fuse_features(x1, x2, x3, x4)
        if not self.config.cvae:
            return {'y_hat': self.decode(None, xout), 'mu': None, 'logvar': None}
        mu, logvar = self.encode_latent(xout, y)
        if eps is None:
            eps = np.zeros(mu.shape)
        z = reparameterize(mu, logvar, eps)
        return {'y_hat': self.decode(z, xout), 'mu': mu, 'logvar': logvar}


def reparameterize(mu, logvar, eps):
    """z = mu + exp(logvar / 2) * eps"""
    mu, logvar = as_tensor(mu), as_tensor(logvar)
    eps = Tensor(np.asarray(eps, dtype=np.float64))
    if eps.shape != mu.shape:
        raise ShapeError('reparameterize', f"eps of shape {mu.shape}", eps.shape)
    return mu + F.exp(logvar * 0.5) * eps


class Ensemble(Module):
    """independently initialized copies of a network, registered as member0, member1, ..."""

    def __init__(self, members):
        super().__init__()
        self.members = list(members)
        for k, m in enumerate(self.members):
            setattr(self, f'member{k}', m)

    def __len__(self):
        return len(self.members)


def maip_net(seed=0, **kwargs):
    return MAIPNet(NetConfig(**kwargs), seed=seed)


def cnn_cvae_net(seed=0, **kwargs):
    kwargs['x4_encoder'] = 'fc'
    return MAIPNet(NetConfig(**kwargs), seed=seed)


def cnn_lstm_net(seed=0, ensemble_size=5, **kwargs):
    kwargs['cvae'] = False
    return Ensemble(MAIPNet(NetConfig(**kwargs), seed=seed + k) for k in range(ensemble_size))
