# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import numpy as np

from maiplab.algorithms.algorithmbase import AlgorithmBase
from maiplab.algorithms.baselines import idm_predict
from maiplab.sim.idm import IDMParams


class IDM(AlgorithmBase):
    """
        Car-following baseline: the intelligent driver model rolled out from the
        last observed speed behind the same-lane leader, heading held at the
        lane tangent. Deterministic; every draw is the same.
    """
    variant = 'idm'
    learned = False
    deterministic = True

    def __init__(self, args, net_builder=None, tb_log=None, logger=None, **kwargs):
        super().__init__(args, net_builder, tb_log, logger, **kwargs)
        self.params = IDMParams()

    def predict_samples(self, batch, n_samples, seed=0, group1=None):
        y = np.stack([idm_predict(s, self.params, self.tp).as_array() for s in batch['samples']])
        return np.repeat(y[:, None], n_samples, axis=1), None
