# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Four-way intersection geometry.

The world is a square centred on the origin (x east, y north, headings in
degrees counter-clockwise from east). Every approach is built from a template
for the south approach, whose inbound traffic heads north, rotated by
(heading - 90) degrees.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from maiplab.errors import GeometryError


APPROACHES = ('N', 'E', 'S', 'W')
# heading of the inbound traffic of each approach
APPROACH_HEADING = {'N': -90.0, 'E': 180.0, 'S': 90.0, 'W': 0.0}
LIGHT_GROUP = {'N': 'ns', 'S': 'ns', 'E': 'ew', 'W': 'ew'}
OPPOSITE = {'N': 'S', 'S': 'N', 'E': 'W', 'W': 'E'}
# inner, middle, outer lane
LANE_TYPES = ('L2', 'L1', 'L3')
LANE_INTENTIONS = {'L1': ('F',), 'L2': ('F', 'L'), 'L3': ('F', 'R')}
INTENTIONS = ('F', 'L', 'R')
NUM_INBOUND = 3 * len(APPROACHES)


def _rot(point, phi):
    c, s = math.cos(phi), math.sin(phi)
    x, y = point
    return (x * c - y * s, x * s + y * c)


def arm_for_heading(heading):
    """arm a vehicle travelling with `heading` drives out of"""
    h = round((heading % 360.0) / 90.0) % 4
    return ('E', 'N', 'W', 'S')[h]


def approach_for_heading(heading):
    """approach whose inbound traffic travels with `heading`"""
    for a, h in APPROACH_HEADING.items():
        if abs(((heading - h + 180.0) % 360.0) - 180.0) < 1.0:
            return a
    raise GeometryError(f"no approach carries heading {heading}")


@dataclass(frozen=True)
class WorldConfig:
    extent: float = 100.0
    lane_width: float = 3.5
    lanes_per_direction: int = 3
    stop_line_offset: float = 16.0
    crosswalk_offset: float = 11.5
    crosswalk_width: float = 3.5
    crosswalk_arms: Tuple[str, ...] = ('N', 'S')
    sidewalk_width: float = 3.0
    light_setback: float = 1.5

    @property
    def half(self):
        return self.extent / 2.0

    @property
    def box_half(self):
        return self.lanes_per_direction * self.lane_width

    def validate(self):
        if self.extent <= 0 or self.lane_width <= 0:
            raise GeometryError("extent and lane width must be positive")
        if self.lanes_per_direction != len(LANE_TYPES):
            raise GeometryError(f"each approach carries exactly {len(LANE_TYPES)} lane types (L2, L1, L3), "
                                f"got {self.lanes_per_direction} lanes")
        if self.crosswalk_width <= 0:
            raise GeometryError(f"crosswalk width must be positive, got {self.crosswalk_width}")
        if self.sidewalk_width <= 0:
            raise GeometryError(f"sidewalk width must be positive, got {self.sidewalk_width}")
        if self.crosswalk_offset < self.box_half:
            raise GeometryError(f"crosswalk at {self.crosswalk_offset} m overlaps the intersection box "
                                f"(half size {self.box_half} m)")
        if self.crosswalk_offset + self.crosswalk_width > self.stop_line_offset:
            raise GeometryError("stop lines must lie before the crosswalks")
        if self.stop_line_offset >= self.half:
            raise GeometryError("stop lines must lie inside the world")
        if self.box_half + self.sidewalk_width >= self.half:
            raise GeometryError("road and sidewalks do not fit inside the world")
        if not 0 < self.light_setback < self.sidewalk_width:
            raise GeometryError("lights must stand on the sidewalk")
        unknown = set(self.crosswalk_arms) - set(APPROACHES)
        if unknown:
            raise GeometryError(f"unknown crosswalk arms {sorted(unknown)}")

    def to_dict(self):
        d = dict(self.__dict__)
        d['crosswalk_arms'] = list(self.crosswalk_arms)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if 'crosswalk_arms' in d:
            d['crosswalk_arms'] = tuple(d['crosswalk_arms'])
        return cls(**d)


@dataclass(frozen=True)
class Rect:
    xmin: float
    xmax: float
    ymin: float
    ymax: float

    def contains(self, x, y):
        return (self.xmin <= x) & (x <= self.xmax) & (self.ymin <= y) & (y <= self.ymax)

    @staticmethod
    def around(points):
        xs, ys = zip(*points)
        return Rect(min(xs), max(xs), min(ys), max(ys))


@dataclass(frozen=True)
class Lane:
    id: int
    approach: str
    index: int
    lane_type: str
    intentions: Tuple[str, ...]
    centerline: Tuple[Tuple[float, float], ...]
    heading: float
    stop_line: Optional[Tuple[float, float]] = None

    @property
    def inbound(self):
        return self.stop_line is not None


@dataclass(frozen=True)
class Crosswalk:
    id: int
    arm: str
    rect: Rect
    # axis pedestrians walk along: 'x' for crosswalks on the N/S arms
    axis: str

    @property
    def walk_group(self):
        """light group whose red phase lets pedestrians walk"""
        return LIGHT_GROUP[self.arm]


class LineSegment:
    def __init__(self, start, end):
        self.start = np.asarray(start, dtype=np.float64)
        self.end = np.asarray(end, dtype=np.float64)
        d = self.end - self.start
        self.length = float(np.hypot(*d))
        self.heading = math.atan2(d[1], d[0])
        self.radius = math.inf

    def pose(self, s):
        p = self.start + (self.end - self.start) * (s / self.length)
        return p[0], p[1], self.heading

    def closest(self, x, y):
        """local arc length of the point nearest to (x, y)"""
        d = self.end - self.start
        t = ((x - self.start[0]) * d[0] + (y - self.start[1]) * d[1]) / (self.length * self.length)
        return min(max(t, 0.0), 1.0) * self.length


class ArcSegment:
    def __init__(self, center, radius, start_angle, sweep):
        self.center = np.asarray(center, dtype=np.float64)
        self.radius = float(radius)
        self.start_angle = start_angle
        self.sweep = sweep
        self.length = abs(sweep) * radius

    def pose(self, s):
        ang = self.start_angle + self.sweep * (s / self.length)
        x = self.center[0] + self.radius * math.cos(ang)
        y = self.center[1] + self.radius * math.sin(ang)
        return x, y, ang + math.copysign(math.pi / 2.0, self.sweep)

    def closest(self, x, y):
        ang = math.atan2(y - self.center[1], x - self.center[0])
        delta = math.remainder(ang - self.start_angle, 2.0 * math.pi)
        if delta * self.sweep < 0.0 and abs(delta) > math.pi / 2.0:
            delta += math.copysign(2.0 * math.pi, self.sweep)
        return min(max(delta / self.sweep, 0.0), 1.0) * self.length


@dataclass(frozen=True)
class CrosswalkCrossing:
    crosswalk_id: int
    s_enter: float
    s_exit: float
    # coordinate along the crosswalk axis where the route crosses it
    position: float


class Route:
    """
    Path of one (inbound lane, intention) pair from the world edge through the
    box to the world edge, parametrized by arc length s.
    """

    def __init__(self, lane, intent, exit_lane, segments, s_stop, s_box_entry, s_box_exit):
        self.lane = lane
        self.intent = intent
        self.exit_lane = exit_lane
        self.segments = segments
        self.s_stop = s_stop
        self.s_box_entry = s_box_entry
        self.s_box_exit = s_box_exit
        self.offsets = np.concatenate([[0.0], np.cumsum([seg.length for seg in segments])])
        self.length = float(self.offsets[-1])
        self.crossings: List[CrosswalkCrossing] = []

    def _locate(self, s):
        s = min(max(float(s), 0.0), self.length)
        k = int(np.searchsorted(self.offsets, s, side='right')) - 1
        k = min(max(k, 0), len(self.segments) - 1)
        return self.segments[k], s - self.offsets[k]

    def pose(self, s):
        """(x, y, heading in degrees) at arc length s (clamped to the route)"""
        seg, local = self._locate(s)
        x, y, h = seg.pose(local)
        return x, y, math.degrees(h)

    def radius_at(self, s):
        return self._locate(s)[0].radius

    @cached_property
    def polyline(self):
        """(s, points) sampled every 0.5 m"""
        s = np.linspace(0.0, self.length, int(math.ceil(self.length / 0.5)) + 1)
        pts = np.array([self.pose(v)[:2] for v in s])
        return s, pts

    def project(self, x, y, s_min=0.0, s_max=None, refine=False):
        """
        Returns:
            (s, lateral distance) of the polyline point nearest to (x, y) within
            [s_min, s_max]; with `refine` the exact nearest point of the route
            segments is returned instead of the 0.5 m sample.
        """
        s_max = self.length if s_max is None else s_max
        if refine:
            return self._project_exact(x, y, s_min, s_max)
        s, pts = self.polyline
        sel = (s >= s_min) & (s <= s_max)
        if not np.any(sel):
            return None, math.inf
        d = np.hypot(pts[sel, 0] - x, pts[sel, 1] - y)
        k = int(np.argmin(d))
        return float(s[sel][k]), float(d[k])

    def _project_exact(self, x, y, s_min, s_max):
        best = (None, math.inf)
        for seg, start in zip(self.segments, self.offsets[:-1]):
            lo, hi = max(s_min - start, 0.0), min(s_max - start, seg.length)
            if lo > hi:
                continue
            local = min(max(seg.closest(x, y), lo), hi)
            px, py, _ = seg.pose(local)
            d = math.hypot(px - x, py - y)
            if d < best[1]:
                best = (float(start + local), d)
        return best

    def curve_ahead(self, s, horizon):
        """(distance to, radius of) the first arc within `horizon` metres ahead of s, or None"""
        for seg, start in zip(self.segments, self.offsets[:-1]):
            if seg.radius != math.inf and start + seg.length > s and start - s <= horizon:
                return max(start - s, 0.0), seg.radius
        return None

    def __repr__(self):
        return f"Route(lane={self.lane.id}, intent={self.intent!r}, length={self.length:.1f})"


@dataclass
class WorldMap:
    config: WorldConfig
    lanes: List[Lane] = field(default_factory=list)
    crosswalks: List[Crosswalk] = field(default_factory=list)
    sidewalks: List[Rect] = field(default_factory=list)
    infeasible: List[Rect] = field(default_factory=list)
    lights: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    routes: Dict[Tuple[int, str], Route] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def empty(cls, config=None):
        return cls(config or WorldConfig())

    @property
    def extent(self):
        return self.config.extent

    @property
    def is_empty(self):
        return not (self.lanes or self.crosswalks or self.sidewalks or self.infeasible or self.lights)

    def lane(self, lane_id):
        for lane in self.lanes:
            if lane.id == lane_id:
                return lane
        raise KeyError(f"unknown lane {lane_id}")

    def inbound_lanes(self, approach=None):
        return [l for l in self.lanes if l.inbound and (approach is None or l.approach == approach)]

    def route(self, lane_id, intent):
        try:
            return self.routes[(lane_id, intent)]
        except KeyError:
            raise KeyError(f"lane {lane_id} has no {intent!r} route") from None

    def approach_of(self, lane_id):
        return APPROACHES[lane_id // 3]

    def light_group(self, lane_id):
        return LIGHT_GROUP[self.approach_of(lane_id)]

    def crosswalk(self, crosswalk_id):
        return self.crosswalks[crosswalk_id]


def _template_route_segments(cfg, k, intent):
    """segments of the south approach's lane k in template coordinates"""
    half, box = cfg.half, cfg.box_half
    x = (k + 0.5) * cfg.lane_width
    segs = [('line', (x, -half), (x, -box))]
    if intent == 'F':
        segs.append(('line', (x, -box), (x, box)))
        segs.append(('line', (x, box), (x, half)))
    elif intent == 'L':
        segs.append(('arc', (-box, -box), box + x, 0.0, math.pi / 2.0))
        segs.append(('line', (-box, x), (-half, x)))
    else:
        segs.append(('arc', (box, -box), box - x, math.pi, -math.pi / 2.0))
        segs.append(('line', (box, -x), (half, -x)))
    return segs


def _build_route(world, lane, intent):
    cfg = world.config
    phi = math.radians(lane.heading - 90.0)
    segments = []
    for spec in _template_route_segments(cfg, lane.index, intent):
        if spec[0] == 'line':
            segments.append(LineSegment(_rot(spec[1], phi), _rot(spec[2], phi)))
        else:
            _, center, radius, start, sweep = spec
            segments.append(ArcSegment(_rot(center, phi), radius, start + phi, sweep))
    exit_heading = {'F': lane.heading, 'L': lane.heading + 90.0, 'R': lane.heading - 90.0}[intent]
    exit_arm = arm_for_heading(exit_heading)
    exit_lane = 12 + 3 * APPROACHES.index(exit_arm) + lane.index
    s_box_entry = cfg.half - cfg.box_half
    route = Route(lane, intent, exit_lane, segments, cfg.half - cfg.stop_line_offset,
                  s_box_entry, s_box_entry + segments[1].length)

    s, pts = route.polyline
    for cw in world.crosswalks:
        inside = cw.rect.contains(pts[:, 0], pts[:, 1])
        if not np.any(inside):
            continue
        idx = np.flatnonzero(inside)
        mid = idx[len(idx) // 2]
        coord = pts[mid, 0] if cw.axis == 'x' else pts[mid, 1]
        route.crossings.append(CrosswalkCrossing(cw.id, float(s[idx[0]]), float(s[idx[-1]]), float(coord)))
    return route


def build_world(config=None):
    """
    Build the intersection map: four approaches with typed inbound lanes
    (inner L2, middle L1, outer L3), outbound lanes, crosswalks, sidewalks,
    building blocks and one light per approach.
    """
    cfg = config or WorldConfig()
    cfg.validate()
    half, box, w, sw = cfg.half, cfg.box_half, cfg.lane_width, cfg.sidewalk_width
    world = WorldMap(cfg)

    for a_idx, approach in enumerate(APPROACHES):
        heading = APPROACH_HEADING[approach]
        phi = math.radians(heading - 90.0)
        for k, lane_type in enumerate(LANE_TYPES):
            x = (k + 0.5) * w
            world.lanes.append(Lane(
                id=3 * a_idx + k, approach=approach, index=k, lane_type=lane_type,
                intentions=LANE_INTENTIONS[lane_type],
                centerline=(_rot((x, -half), phi), _rot((x, -box), phi)),
                heading=heading,
                stop_line=_rot((x, -cfg.stop_line_offset), phi)))
        world.lights[approach] = _rot((box + cfg.light_setback, -cfg.stop_line_offset), phi)

    # outbound lanes, indexed by the arm they leave through
    for a_idx, arm in enumerate(APPROACHES):
        out_heading = (APPROACH_HEADING[arm] + 180.0) % 360.0
        if out_heading >= 180.0:
            out_heading -= 360.0
        phi = math.radians(APPROACH_HEADING[arm] - 90.0)
        for k in range(cfg.lanes_per_direction):
            x = -(k + 0.5) * w
            world.lanes.append(Lane(
                id=12 + 3 * a_idx + k, approach=arm, index=k, lane_type='OUT', intentions=(),
                centerline=(_rot((x, -box), phi), _rot((x, -half), phi)), heading=out_heading))

    for arm in cfg.crosswalk_arms:
        phi = math.radians(APPROACH_HEADING[arm] - 90.0)
        corners = [_rot(p, phi) for p in ((-box, -cfg.crosswalk_offset),
                                          (box, -cfg.crosswalk_offset - cfg.crosswalk_width))]
        axis = 'x' if arm in ('N', 'S') else 'y'
        world.crosswalks.append(Crosswalk(len(world.crosswalks), arm, Rect.around(corners), axis))

    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            # sidewalks along both arms at this corner, corner square included
            world.sidewalks.append(Rect.around([(sx * box, sy * box), (sx * (box + sw), sy * half)]))
            world.sidewalks.append(Rect.around([(sx * (box + sw), sy * box), (sx * half, sy * (box + sw))]))
            world.infeasible.append(Rect.around([(sx * (box + sw), sy * (box + sw)), (sx * half, sy * half)]))

    for lane in world.inbound_lanes():
        for intent in lane.intentions:
            world.routes[(lane.id, intent)] = _build_route(world, lane, intent)
    return world
