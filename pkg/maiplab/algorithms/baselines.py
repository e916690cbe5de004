# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from enum import Enum

import numpy as np

from maiplab.algorithms.utils import PredictionSample
from maiplab.errors import ConfigurationError
from maiplab.sim.idm import IDMParams, idm_accel


class BaselineVariant(str, Enum):
    IDM = 'idm'
    CNN_LSTM = 'cnn_lstm'
    CNN_CVAE = 'cnn_cvae'
    MAIP_RECURSIVE = 'maip_recursive'
    CONST_VEL = 'const_vel'

    @property
    def learned(self):
        """IDM and CONST_VEL need no training artifacts"""
        return self not in (BaselineVariant.IDM, BaselineVariant.CONST_VEL)


def idm_predict(sample, params=None, tp=5, dt=0.2):
    """
    Roll the car-following law forward tp steps from the last observed speed.
    The leader keeps its speed; theta stays at the lane tangent.
    """
    params = params or IDMParams()
    v = float(sample.x4[-1, 3])
    gap, v_lead = float(sample.leader_gap), float(sample.leader_speed)
    speeds = np.zeros(tp)
    for k in range(tp):
        v_next = max(v + idm_accel(v, v_lead, gap, params) * dt, 0.0)
        gap += (v_lead - v_next) * dt
        speeds[k] = v = v_next
    return PredictionSample(v=speeds, theta=np.full(tp, float(sample.lane_heading)))


def const_vel_predict(sample, tp=5):
    """repeat the last observed (v, theta)"""
    last = sample.x4[-1]
    return PredictionSample(v=np.full(tp, float(last[3])), theta=np.full(tp, float(last[2])))


def baseline_predict(variant, sample, params=None, n=1, seed=0, tp=5):
    """
    n predicted futures of one sample by a comparison method.

    Args:
        variant: BaselineVariant or its name
        params: IDMParams for IDM; the trained algorithm for the learned variants
        tp: horizon of the rule-based variants (learned ones use their own)
    """
    variant = BaselineVariant(variant)
    if variant == BaselineVariant.IDM:
        return [idm_predict(sample, params, tp) for _ in range(n)]
    if variant == BaselineVariant.CONST_VEL:
        return [const_vel_predict(sample, tp) for _ in range(n)]
    if params is None or not getattr(params, 'trained', False):
        raise ConfigurationError(f"{variant.value} needs a trained model")
    if params.variant != variant.value:
        raise ConfigurationError(f"a {params.variant} model cannot serve {variant.value} predictions")
    return params.predict([sample], n, seed)[sample.vehicle_id]
