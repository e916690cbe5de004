# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from dataclasses import dataclass

import numpy as np


# gap used when there is no leader
FREE_ROAD_GAP = 1e4


@dataclass(frozen=True)
class IDMParams:
    """
    Intelligent Driver Model parameters.

    Args:
        v0: desired speed (m/s)
        T: safe time headway (s)
        s0: minimum net distance (m)
        a_max: maximum acceleration (m/s^2)
        b: comfortable deceleration (m/s^2)
        delta: acceleration exponent
        b_hard: emergency deceleration bound (m/s^2)
    """
    v0: float = 12.0
    T: float = 1.5
    s0: float = 2.0
    a_max: float = 1.5
    b: float = 2.0
    delta: float = 4.0
    b_hard: float = 8.0


def desired_gap(v, v_lead, params):
    return params.s0 + v * params.T + v * (v - v_lead) / (2.0 * np.sqrt(params.a_max * params.b))


def idm_response(v, v_lead, gap, params=IDMParams(), v0=None):
    """
    Returns:
        (acceleration clamped to [-b_hard, a_max], collision flag)
    """
    if gap <= 0.0:
        return -params.b_hard, True
    v0 = params.v0 if v0 is None else v0
    s_star = max(desired_gap(v, v_lead, params), 0.0)
    free = (v / v0) ** params.delta if v0 > 0 else 1.0
    a = params.a_max * (1.0 - free - (s_star / gap) ** 2)
    return float(np.clip(a, -params.b_hard, params.a_max)), False


def idm_accel(v, v_lead, gap, params=IDMParams(), v0=None):
    """
    a = a_max * [1 - (v / v0)^delta - (s* / gap)^2],
    s* = s0 + v T + v (v - v_lead) / (2 sqrt(a_max b))

    A non-positive gap means the vehicles touch: the emergency deceleration
    -b_hard is returned (see `idm_response` for the collision flag).
    """
    return idm_response(v, v_lead, gap, params, v0)[0]


def braking_distance(v, params=IDMParams()):
    """distance needed to stop from v at the comfortable deceleration"""
    return v * v / (2.0 * params.b)


def braking_envelope(v, params=IDMParams()):
    """look-ahead within which a vehicle must start reacting to an obstacle"""
    return braking_distance(v, params) + v * params.T + params.s0
