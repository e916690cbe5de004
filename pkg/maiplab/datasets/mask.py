# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from dataclasses import dataclass

import numpy as np

from maiplab.errors import ShapeError
from maiplab.datasets.encoder import cell_centers, cell_index, grid_size, lane_rect
from maiplab.sim.world import APPROACHES, APPROACH_HEADING, LIGHT_GROUP, OPPOSITE, Rect, approach_for_heading


@dataclass(frozen=True)
class MaskConfig:
    corridor_halfwidth: float = 10.0
    corridor_length: float = 40.0
    # crosswalk strips are extended by this much at both curbs to keep waiting pedestrians
    curb_margin: float = 2.0


def conflicting_approaches(intent, approach, light):
    """
    Approaches whose inbound lanes hold traffic with conflicting right of way:

        L on G/Y  -> the opposing approach (oncoming straight traffic)
        R         -> the cross approach whose traffic the turn merges into
        F on R/Y  -> both cross approaches (traffic about to move or clearing)
    """
    heading = APPROACH_HEADING[approach]
    if intent == 'L' and light in ('G', 'Y'):
        return [OPPOSITE[approach]]
    if intent == 'R':
        return [approach_for_heading(heading - 90.0)]
    if intent == 'F' and light in ('R', 'Y'):
        return [approach_for_heading(heading - 90.0), approach_for_heading(heading + 90.0)]
    return []


def build_mask(world, frame, vehicle_id, resolution=2.0, config=None):
    """
    Binary mask M of the environment cells relevant to one vehicle: its
    corridor ahead, the crosswalks its route crosses in that range, the inbound
    lanes of approaches with conflicting right of way and the cells of the
    lights governing it.

    Raises:
        KeyError: the vehicle is not in the frame
    """
    config = config or MaskConfig()
    vehicle = frame.vehicle(vehicle_id)
    route = world.route(vehicle.lane, vehicle.intent)
    approach = APPROACHES[vehicle.lane // 3]
    light = frame.lights[LIGHT_GROUP[approach]]
    xs, ys = cell_centers(world.extent, resolution)
    n = grid_size(world.extent, resolution)
    mask = np.zeros((n, n), dtype=bool)

    s_ego, _ = route.project(vehicle.x, vehicle.y, refine=True)
    s_path = np.arange(s_ego, min(s_ego + config.corridor_length, route.length) + 1e-9, 0.5)
    if len(s_path):
        path = np.array([route.pose(s)[:2] for s in s_path])
        cx, cy = xs.reshape(-1, 1), ys.reshape(-1, 1)
        d = np.min(np.hypot(cx - path[None, :, 0], cy - path[None, :, 1]), axis=1)
        mask |= (d <= config.corridor_halfwidth).reshape(n, n)

    m = config.curb_margin
    for crossing in route.crossings:
        if crossing.s_exit < s_ego or crossing.s_enter > s_ego + config.corridor_length:
            continue
        r = world.crosswalk(crossing.crosswalk_id).rect
        if world.crosswalk(crossing.crosswalk_id).axis == 'x':
            r = Rect(r.xmin - m, r.xmax + m, r.ymin, r.ymax)
        else:
            r = Rect(r.xmin, r.xmax, r.ymin - m, r.ymax + m)
        mask |= r.contains(xs, ys)

    for other in conflicting_approaches(vehicle.intent, approach, light):
        for lane in world.inbound_lanes(other):
            mask |= lane_rect(world, lane).contains(xs, ys)

    for a in APPROACHES:
        if LIGHT_GROUP[a] == LIGHT_GROUP[approach] and a in world.lights:
            row, col = cell_index(*world.lights[a], world.extent, resolution)
            if 0 <= row < n and 0 <= col < n:
                mask[row, col] = True
    return mask.astype(np.int8)


def apply_mask(frame, vehicle_id, x2, world=None, resolution=2.0, config=None, mask=None):
    """
    X2_hat = M * X2 (elementwise). `mask` overrides the rule-built mask.
    """
    x2 = np.asarray(x2)
    if mask is None:
        mask = build_mask(world, frame, vehicle_id, resolution, config)
    mask = np.asarray(mask)
    if mask.shape != x2.shape:
        raise ShapeError('apply_mask', f"mask of shape {x2.shape}", mask.shape)
    return (mask * x2).astype(x2.dtype)
