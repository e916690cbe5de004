# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import logging
from typing import NamedTuple

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage

from maiplab.utils import wrap_degrees


logger = logging.getLogger(__name__)

MODE_RADIUS = 15.0


def dead_reckon(x0, y0, v, theta, dt=0.2):
    """
    Integrate (v, theta) steps from (x0, y0).

    Returns:
        [Tp + 1, 2] polyline starting at (x0, y0); step k moves v_k * dt along theta_k
    """
    v = np.asarray(v, dtype=np.float64)
    rad = np.radians(np.asarray(theta, dtype=np.float64))
    steps = np.stack([v * dt * np.cos(rad), v * dt * np.sin(rad)], axis=-1)
    return np.vstack([[x0, y0], np.array([x0, y0]) + np.cumsum(steps, axis=0)])


class Modes(NamedTuple):
    count: int
    # cluster label of each sample, numbered by first appearance
    labels: np.ndarray
    headings: np.ndarray


def endpoint_headings(samples, dt=0.2):
    """
    Direction from the start to the dead-reckoned endpoint of each sample,
    wrapped to [-180, 180). A sample that does not move keeps its last yaw.
    """
    headings = []
    for s in samples:
        dx, dy = dead_reckon(0.0, 0.0, s.v, s.theta, dt)[-1]
        headings.append(np.degrees(np.arctan2(dy, dx)) if np.hypot(dx, dy) > 1e-9 else s.theta[-1])
    return wrap_degrees(np.array(headings, dtype=np.float64))


def cluster_modes(samples, radius=MODE_RADIUS):
    """
    Group sampled futures by their endpoint heading with single-linkage
    agglomeration: two samples share a mode when a chain of samples links them
    with heading steps of at most `radius` degrees (wrapped).

    Args:
        samples: list of PredictionSample (>= 10 for a meaningful count)
    """
    headings = endpoint_headings(samples)
    n = len(headings)
    if n < 10:
        logger.debug("clustering only %d samples", n)
    if n == 0:
        return Modes(0, np.zeros(0, dtype=int), headings)
    if n == 1:
        return Modes(1, np.zeros(1, dtype=int), headings)
    i, j = np.triu_indices(n, k=1)
    distances = np.abs(wrap_degrees(headings[i] - headings[j]))
    raw = fcluster(linkage(distances, method='single'), t=radius, criterion='distance')
    order = {}
    labels = np.array([order.setdefault(c, len(order)) for c in raw], dtype=int)
    return Modes(len(order), labels, headings)
