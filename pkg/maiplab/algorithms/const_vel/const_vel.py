# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import numpy as np

from maiplab.algorithms.algorithmbase import AlgorithmBase
from maiplab.algorithms.baselines import const_vel_predict


class ConstVel(AlgorithmBase):
    """
        Persistence control: the last observed (v, theta) repeated over the horizon.
    """
    variant = 'const_vel'
    learned = False
    deterministic = True

    def predict_samples(self, batch, n_samples, seed=0, group1=None):
        y = np.stack([const_vel_predict(s, self.tp).as_array() for s in batch['samples']])
        return np.repeat(y[:, None], n_samples, axis=1), None
