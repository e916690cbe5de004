# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import math
from dataclasses import replace

import numpy as np

from maiplab.algorithms.maip import MAIP
from maiplab.datasets.encoder import DYNAMIC_CODES, EncoderConfig, box_footprint
from maiplab.datasets.sampler import collate
from maiplab.utils import wrap_degrees


def advance_sample(sample, v, theta, dt=0.2, config=None):
    """
    Shift a sample's history windows by one synthetic frame in which the ego
    vehicle moved v * dt along theta. Other entities keep their last position.

    The new X4 row carries the dead-reckoned pose, a = (v - v_prev) / dt and the
    last light one-hot; the ego's old cells are cleared from X2 and its new box
    is painted into X2 and X3.
    """
    config = config or EncoderConfig(resolution=sample.resolution)
    last = sample.x4[-1]
    rad = math.radians(theta)
    x = last[0] + v * dt * math.cos(rad)
    y = last[1] + v * dt * math.sin(rad)
    row = np.concatenate([[x, y, float(wrap_degrees(theta)), v, (v - last[3]) / dt], last[5:]])

    extent = sample.x1.shape[-1] * sample.resolution
    footprint = box_footprint(x, y, theta, config.vehicle_length, config.vehicle_width, extent, sample.resolution)
    code = DYNAMIC_CODES['vehicle']
    x3 = np.zeros_like(sample.x3[-1])
    x3[footprint] = code
    x2 = sample.x2[-1].copy()
    x2[(sample.x3[-1] != 0) & (x2 == code)] = 0
    x2[footprint] = code
    return replace(sample,
                   x2=np.concatenate([sample.x2[1:], x2[None]]),
                   x3=np.concatenate([sample.x3[1:], x3[None]]),
                   x4=np.vstack([sample.x4[1:], row]),
                   y=None, t=sample.t + 1)


def recursive_rollout(samples, step_fn, tp, dt=0.2, config=None):
    """
    Run a one-step predictor for tp steps, feeding every predicted (v, theta)
    back through `advance_sample`.

    Args:
        samples: list of TrainingSample (replicate one sample to roll out several draws)
        step_fn: callable mapping the current samples to [len(samples), 2] next-step (v, theta)
    Returns:
        [len(samples), tp, 2]
    """
    current = list(samples)
    out = np.zeros((len(current), tp, 2))
    for k in range(tp):
        pred = np.asarray(step_fn(current), dtype=np.float64).reshape(len(current), 2)
        out[:, k] = pred
        if k + 1 < tp:
            current = [advance_sample(s, v, theta, dt, config) for s, (v, theta) in zip(current, pred)]
    return out


class MAIPRecursive(MAIP):
    """
        MAIP trained for a single future frame and applied recursively over the
        prediction horizon. Each draw keeps its own latent sequence, one z per step.
    """
    variant = 'maip_recursive'

    @property
    def train_tp(self):
        return 1

    def predict_samples(self, batch, n_samples, seed=0, group1=None):
        # the dynamic map changes during the rollout, so only X1 features can be shared
        group1 = group1 if self.use_mask else None
        samples = batch['samples']
        y = np.zeros((len(samples), n_samples, self.tp, 2))
        z = np.zeros((len(samples), n_samples, self.tp, self.latent_dim))
        for b, (sample, key) in enumerate(zip(samples, batch['rng_keys'])):
            rng = np.random.default_rng([seed, *key])
            draws = []

            def step_fn(current):
                eps = rng.standard_normal((len(current), 1, self.latent_dim))
                draws.append(eps[:, 0])
                return self.decode_batch(collate(current, self.map_history), eps, group1)[:, 0, 0]

            y[b] = recursive_rollout([sample] * n_samples, step_fn, self.tp)
            z[b] = np.stack(draws, axis=1)
        return y, z
