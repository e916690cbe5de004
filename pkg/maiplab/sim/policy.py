# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Rule-based driving behaviour: IDM car following plus the priority rules of the
intersection (signals, unprotected left turns, right-turn merges and
pedestrians on crosswalks).
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional

import numpy as np

from maiplab.sim.idm import IDMParams, FREE_ROAD_GAP, idm_response, braking_distance, braking_envelope
from maiplab.sim.world import OPPOSITE, LIGHT_GROUP


@dataclass
class PolicyConfig:
    idm: IDMParams = field(default_factory=IDMParams)
    vehicle_length: float = 4.5
    vehicle_width: float = 2.0
    # half width of the strip around a route in which other vehicles are followed
    corridor_halfwidth: float = 2.5
    lookahead: float = 60.0
    # lateral acceleration bounding the speed on turn arcs
    lateral_accel: float = 2.5
    # routes closer than vehicle_width + conflict_clearance share a conflict zone
    conflict_clearance: float = 0.5
    # a vehicle giving way stops this far before the zone
    conflict_stop_margin: float = 1.0
    # unprotected left turn
    left_turn_margin: float = 1.5
    # right-turn merge: minimum time headway of main-road traffic
    merge_headway: float = 3.0
    # pedestrians
    ped_conflict_halfwidth: float = 2.5
    ped_time_buffer: float = 2.0
    ped_stop_margin: float = 1.0


@dataclass
class Agent:
    """a vehicle as seen by the policy: its route and arc-length position"""
    id: int
    route: object
    s: float
    v: float
    a: float = 0.0
    committed: bool = False
    length: float = 4.5

    @property
    def lane(self):
        return self.route.lane.id

    @property
    def intent(self):
        return self.route.intent

    @property
    def approach(self):
        return self.route.lane.approach

    @property
    def front(self):
        return self.s + self.length / 2.0

    @property
    def rear(self):
        return self.s - self.length / 2.0

    def pose(self):
        return self.route.pose(self.s)


@dataclass
class Walker:
    id: int
    crosswalk: object
    x: float
    y: float
    speed: float
    direction: float
    walking: bool = False

    @property
    def position(self):
        """coordinate along the crosswalk axis"""
        return self.x if self.crosswalk.axis == 'x' else self.y

    def on_road(self, box_half):
        return abs(self.position) <= box_half


@dataclass
class Scene:
    agents: List[Agent]
    walkers: List[Walker]
    lights: object


@dataclass
class Decision:
    accel: float
    # must not pass the stop line this step
    hold: bool = False
    # crossed the point of no return for the current signal
    commit: bool = False
    reason: str = 'free'
    collision: bool = False


def time_to_cover(d, v, a, vmax):
    """minimum time to travel d metres from speed v accelerating at a up to vmax"""
    if d <= 0.0:
        return 0.0
    vmax = max(vmax, v, 1e-3)
    t_acc = (vmax - v) / a
    d_acc = v * t_acc + 0.5 * a * t_acc * t_acc
    if d_acc >= d:
        return (-v + math.sqrt(v * v + 2.0 * a * d)) / a
    return t_acc + (d - d_acc) / vmax


def turn_speed(radius, config):
    return math.sqrt(config.lateral_accel * radius) if math.isfinite(radius) else config.idm.v0


@lru_cache(maxsize=None)
def conflict_zone(route_a, route_b, clearance, tail):
    """
    Arc-length intervals ((a_in, a_out), (b_in, b_out)) over which two routes
    run closer than `clearance`, searched from the stop lines to `tail` metres
    past the box. None when the routes keep apart.
    """
    sa, pa = route_a.polyline
    sb, pb = route_b.polyline
    ia = (sa >= route_a.s_stop) & (sa <= route_a.s_box_exit + tail)
    ib = (sb >= route_b.s_stop) & (sb <= route_b.s_box_exit + tail)
    if not ia.any() or not ib.any():
        return None
    close = np.hypot(pa[ia, None, 0] - pb[None, ib, 0], pa[ia, None, 1] - pb[None, ib, 1]) < clearance
    if not close.any():
        return None
    za = sa[ia][close.any(axis=1)]
    zb = sb[ib][close.any(axis=0)]
    return (float(za.min()), float(za.max())), (float(zb.min()), float(zb.max()))


def shared_zone(a, b, config):
    """conflict zone of two vehicles on different inbound lanes, seen from `a`"""
    if a.lane == b.lane:
        return None
    return conflict_zone(a.route, b.route, config.vehicle_width + config.conflict_clearance, config.vehicle_length)


@lru_cache(maxsize=None)
def merge_point(route, other):
    """arc length on `other` of the point where `route` joins its exit lane"""
    x, y, _ = route.pose(route.s_box_exit)
    s, d = other.project(x, y)
    return s if d < 1.0 else None


def _idm(agent, v_lead, gap, config, v0=None):
    return idm_response(agent.v, v_lead, gap, config.idm, v0)


def _zone_stage(agent, s_in, params):
    """0 inside the zone, 1 unable to stop before it even braking hard, 2 free to yield"""
    if agent.front >= s_in:
        return 0
    if agent.front + agent.v * agent.v / (2.0 * params.b_hard) >= s_in:
        return 1
    return 2


def _opposing_left(a, b):
    return {a.intent, b.intent} == {'L', 'F'} and a.approach == OPPOSITE[b.approach]


def goes_first(a, zone_a, b, zone_b, config):
    """
    Right of way of `a` over `b` at their shared conflict zone.

    Vehicles already in the zone, then vehicles that can no longer stop
    before it, go first. Among vehicles that can still stop a left turner
    waits for an oncoming straight vehicle unless it clears the zone
    `left_turn_margin` seconds earlier, committed vehicles go before those
    still behind their stop line, and otherwise the earlier arrival goes.
    goes_first(a, ., b, .) is always the negation of goes_first(b, ., a, .).
    """
    if a.id > b.id:
        return not goes_first(b, zone_b, a, zone_a, config)
    p = config.idm
    stage_a, stage_b = _zone_stage(a, zone_a[0], p), _zone_stage(b, zone_b[0], p)
    if stage_a != stage_b:
        return stage_a < stage_b
    t_a = time_to_cover(zone_a[0] - a.front, a.v, p.a_max, p.v0)
    t_b = time_to_cover(zone_b[0] - b.front, b.v, p.a_max, p.v0)
    if stage_a == 2:
        if _opposing_left(a, b):
            if a.intent == 'L':
                t_a += config.left_turn_margin
            else:
                t_b += config.left_turn_margin
        elif a.committed != b.committed:
            return a.committed
    return t_a <= t_b


def held_by_signal(agent, lights):
    """an F or L vehicle still behind its line on red: it will not enter the box"""
    return not agent.committed and agent.intent != 'R' and lights[LIGHT_GROUP[agent.approach]] == 'R'


def conflict_yields(ego, scene, config):
    """
    Conflict zones ahead of the ego that another vehicle occupies first.

    Two vehicles that are both still behind their stop lines and can stop
    leave each other to the stop-line rules.

    Returns:
        list of (s_in, other)
    """
    p = config.idm
    out = []
    for other in scene.agents:
        if other.id == ego.id:
            continue
        zone = shared_zone(ego, other, config)
        if zone is None:
            continue
        zone_ego, zone_other = zone
        if ego.front >= zone_ego[0] or ego.rear > zone_ego[1] or other.rear > zone_other[1]:
            continue
        if held_by_signal(other, scene.lights):
            continue
        if not (ego.committed or other.committed or _zone_stage(other, zone_other[0], p) < 2):
            continue
        if goes_first(other, zone_other, ego, zone_ego, config):
            out.append((zone_ego[0], other))
    return out


def _passes_first(a, d_a, b, d_b, config):
    """order of two vehicles heading for each other's position; antisymmetric in (a, b)"""
    if a.id > b.id:
        return not _passes_first(b, d_b, a, d_a, config)
    zone = shared_zone(a, b, config)
    if zone is not None:
        return goes_first(a, zone[0], b, zone[1], config)
    p = config.idm
    return time_to_cover(d_a, a.v, p.a_max, p.v0) <= time_to_cover(d_b, b.v, p.a_max, p.v0)


def find_leader(ego, scene, config):
    """
    Nearest vehicle inside the corridor around the ego's remaining route.

    When two vehicles are in each other's corridor (crossing paths) the one
    with the right of way ignores the other, which follows it.

    Returns:
        (agent, gap, speed along the ego route) or (None, FREE_ROAD_GAP, 0)
    """
    best = (None, FREE_ROAD_GAP, 0.0)
    for other in scene.agents:
        if other.id == ego.id:
            continue
        ox, oy, oh = other.pose()
        s_on, lat = ego.route.project(ox, oy, ego.s, ego.s + config.lookahead)
        if s_on is None or lat > config.corridor_halfwidth or s_on <= ego.s:
            continue
        ex, ey, eh = ego.pose()
        s_back, lat_back = other.route.project(ex, ey, other.s, other.s + config.lookahead)
        if s_back is not None and lat_back <= config.corridor_halfwidth and s_back > other.s:
            if _passes_first(ego, s_on - ego.s, other, s_back - other.s, config):
                continue
        gap = s_on - ego.s - (ego.length + other.length) / 2.0
        heading_on = ego.route.pose(s_on)[2]
        v_lead = max(other.v * math.cos(math.radians(oh - heading_on)), 0.0)
        if gap < best[1]:
            best = (other, gap, v_lead)
    return best


def must_stop_for_signal(ego, lights, config):
    """
    Signal rule for F and L vehicles that have not committed: red always stops,
    yellow stops when the line can be reached at comfortable deceleration.

    Returns:
        (stop, commit)
    """
    if ego.committed or ego.intent == 'R':
        return False, False
    color = lights[LIGHT_GROUP[ego.approach]]
    if color == 'G':
        return False, False
    if color == 'R':
        return True, False
    if braking_distance(ego.v, config.idm) <= ego.route.s_stop - ego.front + 0.5:
        return True, False
    return False, True


def left_turn_blocked(ego, scene, config):
    """True while oncoming straight traffic reaches the shared zone before the ego clears it"""
    p = config.idm
    for other in scene.agents:
        if other.intent != 'F' or other.approach != OPPOSITE[ego.approach]:
            continue
        zone = shared_zone(ego, other, config)
        if zone is None:
            continue
        (_, ego_out), (other_in, other_out) = zone
        if other.rear > other_out:
            continue
        d_other = other_in - other.front
        if d_other <= 0.0:
            return True
        t_other = time_to_cover(d_other, other.v, p.a_max, p.v0)
        v_turn = turn_speed(ego.route.radius_at(ego.route.s_box_entry + 0.1), config)
        t_ego = time_to_cover(ego_out - ego.rear, ego.v, p.a_max, v_turn)
        if t_other < t_ego + config.left_turn_margin:
            return True
    return False


def merge_blocked(ego, scene, config):
    """True while main-road traffic would reach the merge point within the headway"""
    lights = scene.lights
    s_ego_m = ego.route.s_box_exit
    v_turn = turn_speed(ego.route.radius_at(ego.route.s_box_entry + 0.1), config)
    t_ego = time_to_cover(s_ego_m - ego.front, ego.v, config.idm.a_max, v_turn)
    for other in scene.agents:
        if other.id == ego.id or other.route.exit_lane != ego.route.exit_lane:
            continue
        if other.intent != 'R' and not other.committed and lights[LIGHT_GROUP[other.approach]] == 'R' \
                and other.front <= other.route.s_stop:
            continue
        s_m = merge_point(ego.route, other.route)
        if s_m is None or other.rear > s_m + 2.0:
            continue
        t_other = time_to_cover(s_m - other.front, other.v, config.idm.a_max, config.idm.v0)
        if t_other - t_ego < config.merge_headway:
            return True
    return False


def pedestrian_conflicts(ego, scene, box_half, config):
    """
    Crosswalk crossings ahead of the ego with a pedestrian in, or about to
    enter, the part of the crosswalk the ego drives through.

    Returns:
        list of (s_enter, walker)
    """
    out = []
    for crossing in ego.route.crossings:
        if ego.front >= crossing.s_enter:
            continue
        for w in scene.walkers:
            if w.crosswalk.id != crossing.crosswalk_id:
                continue
            if not (w.walking or w.on_road(box_half)):
                continue
            offset = crossing.position - w.position
            dist = abs(offset) - config.ped_conflict_halfwidth
            approaching = offset * w.direction > 0 and dist <= w.speed * config.ped_time_buffer
            if dist <= 0.0 or approaching:
                out.append((crossing.s_enter, w))
    return out


def behavior_policy(world, scene, ego, config=None):
    """
    Acceleration command of one vehicle.

    The command is the minimum over: car following (IDM on the corridor
    leader), the curve-speed limit of upcoming arcs, a stop at the stop line
    (signal, unprotected left turn, right-turn merge), a stop before every
    conflict zone another vehicle has the right of way through, and a stop
    before any crosswalk with a conflicting pedestrian. Inside the braking envelope of
    such a crosswalk the command is never positive, whatever the signal.
    """
    config = config or PolicyConfig()
    p = config.idm
    reasons = []

    v0 = p.v0
    curve = ego.route.curve_ahead(ego.s, config.lookahead)
    a_curve = math.inf
    if curve is not None:
        d, radius = curve
        v_c = min(turn_speed(radius, config), p.v0)
        if d <= 0.0:
            v0 = v_c
        elif ego.v > v_c:
            a_curve = (v_c * v_c - ego.v * ego.v) / (2.0 * max(d, 1.0))

    _, gap, v_lead = find_leader(ego, scene, config)
    accel, collision = _idm(ego, v_lead, gap, config, v0)
    if gap < FREE_ROAD_GAP:
        reasons.append('follow')
    if a_curve < accel:
        accel = max(a_curve, -p.b_hard)
        reasons.append('curve')

    hold = commit = False
    if not ego.committed and ego.front <= ego.route.s_stop + 0.5:
        stop, commit = must_stop_for_signal(ego, scene.lights, config)
        if stop:
            reasons.append('signal')
        elif ego.intent == 'L' and left_turn_blocked(ego, scene, config):
            stop = True
            reasons.append('yield_left')
        elif ego.intent == 'R' and merge_blocked(ego, scene, config):
            stop = True
            reasons.append('merge_gap')
        if stop:
            hold = True
            a_stop, _ = _idm(ego, 0.0, max(ego.route.s_stop - ego.front, 1e-3) + p.s0, config, v0)
            accel = min(accel, a_stop)

    for s_in, _ in conflict_yields(ego, scene, config):
        d = s_in - config.conflict_stop_margin - ego.front
        a_zone, _ = _idm(ego, 0.0, max(d, 1e-3) + p.s0, config, v0)
        accel = min(accel, a_zone)
        reasons.append('give_way')

    for s_enter, _ in pedestrian_conflicts(ego, scene, world.config.box_half, config):
        d = s_enter - config.ped_stop_margin - ego.front
        a_ped, _ = _idm(ego, 0.0, max(d, 1e-3) + p.s0, config, v0)
        accel = min(accel, a_ped)
        if s_enter - ego.front <= braking_envelope(ego.v, p):
            accel = min(accel, 0.0)
        reasons.append('pedestrian')

    return Decision(accel=float(accel), hold=hold, commit=commit,
                    reason='+'.join(dict.fromkeys(reasons)) or 'free', collision=collision)
