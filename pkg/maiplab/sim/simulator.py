# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Tuple

import numpy as np

from maiplab.errors import ConfigurationError
from maiplab.utils import wrap_degrees
from maiplab.sim.idm import IDMParams
from maiplab.sim.policy import Agent, Walker, Scene, PolicyConfig, behavior_policy
from maiplab.sim.world import APPROACHES, APPROACH_HEADING, LIGHT_GROUP, OPPOSITE, approach_for_heading


logger = logging.getLogger(__name__)

SCENARIO_CASES = ('unprotected_left', 'right_merge', 'pedestrian')


# -- states --------------------------------------------------------------

@dataclass(frozen=True)
class VehicleState:
    id: int
    x: float
    y: float
    theta: float
    v: float
    a: float
    lane: int
    intent: str

    def to_record(self):
        return {'id': self.id, 'x': self.x, 'y': self.y, 'theta': self.theta, 'v': self.v, 'a': self.a,
                'lane': self.lane, 'intent': self.intent}


@dataclass(frozen=True)
class PedestrianState:
    id: int
    x: float
    y: float
    # simulator-side fields, not part of the dataset record
    speed: Optional[float] = field(default=None, compare=False)
    crosswalk: Optional[int] = field(default=None, compare=False)
    direction: Optional[Tuple[float, float]] = field(default=None, compare=False)

    def to_record(self):
        return {'id': self.id, 'x': self.x, 'y': self.y}


@dataclass(frozen=True)
class LightState:
    ns: str
    ew: str
    # seconds into the signal cycle; unknown for frames read back from disk
    timer: Optional[float] = field(default=None, compare=False)

    def __getitem__(self, group):
        return getattr(self, group)

    def to_record(self):
        return {'ns': self.ns, 'ew': self.ew}


@dataclass(frozen=True)
class Frame:
    t: int
    lights: LightState
    vehicles: Tuple[VehicleState, ...] = ()
    peds: Tuple[PedestrianState, ...] = ()
    ep: int = 0

    def vehicle(self, vehicle_id):
        for v in self.vehicles:
            if v.id == vehicle_id:
                return v
        raise KeyError(f"vehicle {vehicle_id} not in frame {self.t}")

    def has_vehicle(self, vehicle_id):
        return any(v.id == vehicle_id for v in self.vehicles)

    @property
    def vehicle_ids(self):
        return [v.id for v in self.vehicles]

    def to_record(self):
        return {'ep': self.ep, 't': self.t, 'lights': self.lights.to_record(),
                'vehicles': [v.to_record() for v in self.vehicles],
                'peds': [p.to_record() for p in self.peds]}

    @classmethod
    def from_record(cls, rec):
        vehicles = tuple(VehicleState(int(v['id']), float(v['x']), float(v['y']), float(v['theta']), float(v['v']),
                                      float(v['a']), int(v['lane']), str(v['intent'])) for v in rec['vehicles'])
        peds = tuple(PedestrianState(int(p['id']), float(p['x']), float(p['y'])) for p in rec['peds'])
        lights = LightState(rec['lights']['ns'], rec['lights']['ew'])
        return cls(int(rec['t']), lights, vehicles, peds, int(rec['ep']))


@dataclass
class Episode:
    frames: List[Frame]
    seed: Optional[int] = None
    metadata: Dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)

    @property
    def ep(self):
        return self.frames[0].ep if self.frames else self.metadata.get('ep', 0)


# -- configuration -------------------------------------------------------

@dataclass(frozen=True)
class LightCycle:
    """
    Two-group fixed cycle. Group `ns` starts green; `ew` is red while `ns` is
    green or yellow and vice versa, so red = green + yellow.
    """
    green: float = 15.0
    yellow: float = 3.0
    red: float = 18.0

    def __post_init__(self):
        if self.green <= 0 or self.yellow < 0 or abs(self.red - (self.green + self.yellow)) > 1e-9:
            raise ConfigurationError(f"light cycle needs red == green + yellow, got {self}")

    @property
    def period(self):
        return 2.0 * (self.green + self.yellow)

    def state(self, timer):
        tau = timer % self.period
        half = self.green + self.yellow

        def color(t):
            return 'G' if t < self.green else ('Y' if t < half else 'R')

        ns = color(tau) if tau < half else 'R'
        ew = 'R' if tau < half else color(tau - half)
        return LightState(ns, ew, tau)

    def timer_for(self, lights):
        """earliest cycle time showing the given colors"""
        if lights.ns != 'R':
            return 0.0 if lights.ns == 'G' else self.green
        return self.green + self.yellow + (0.0 if lights.ew == 'G' else self.green)


@dataclass
class SimConfig:
    dt: float = 0.2
    episode_length: int = 300
    min_vehicles: int = 4
    max_vehicles: int = 6
    spawn_prob: float = 0.05
    spawn_clearance: float = 15.0
    initial_speed: Tuple[float, float] = (0.6, 1.0)
    ped_rate: float = 0.03
    ped_case_rate: float = 0.12
    ped_speed: Tuple[float, float] = (0.8, 1.8)
    max_peds_per_crosswalk: int = 4
    case_bias: float = 0.5
    lights: LightCycle = field(default_factory=LightCycle)
    policy: PolicyConfig = field(default_factory=PolicyConfig)

    def __post_init__(self):
        if not 1 <= self.min_vehicles <= self.max_vehicles:
            raise ConfigurationError("need 1 <= min_vehicles <= max_vehicles")
        if self.dt <= 0:
            raise ConfigurationError("dt must be positive")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if 'lights' in d:
            d['lights'] = LightCycle(**d['lights'])
        if 'policy' in d:
            pol = dict(d['policy'])
            pol['idm'] = IDMParams(**pol.get('idm', {}))
            d['policy'] = PolicyConfig(**pol)
        for key in ('initial_speed', 'ped_speed'):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def vehicle_corners(x, y, theta, length, width):
    """corners of the oriented box of a vehicle, counter-clockwise from front left"""
    c, s = math.cos(math.radians(theta)), math.sin(math.radians(theta))
    along = 0.5 * length * np.array([c, s])
    across = 0.5 * width * np.array([-s, c])
    center = np.array([x, y])
    return np.array([center + along + across, center - along + across, center - along - across,
                     center + along - across])


def boxes_overlap(a, b, eps=1e-9):
    """separating-axis test of two convex quadrilaterals; touching edges do not overlap"""
    for corners in (a, b):
        for k in range(2):
            edge = corners[k + 1] - corners[k]
            axis = np.array([-edge[1], edge[0]])
            pa, pb = a @ axis, b @ axis
            if pa.max() <= pb.min() + eps or pb.max() <= pa.min() + eps:
                return False
    return True


def advance_along(s, v, a, dt):
    """semi-implicit point-mass update along a path: returns (s', v')"""
    v_next = max(v + a * dt, 0.0)
    return s + v_next * dt, v_next


# -- simulator -----------------------------------------------------------

class IntersectionSimulator:
    """
    Seeded micro-simulator of one episode.

    At every tick each vehicle's command is decided from the current state,
    the frame (state plus command) is recorded, and then every entity is
    integrated over `dt`. Vehicles are processed in id order and all random
    draws come from the episode generator, so (seed, config) fixes the episode.
    """

    def __init__(self, world, config=None, rng=None, ep=0, case=None):
        self.world = world
        self.config = config or SimConfig()
        self.rng = rng
        self.ep = ep
        self.case = case
        self.t = 0
        self.timer = 0.0
        self.agents: Dict[int, Agent] = {}
        self.walkers: Dict[int, Walker] = {}
        self.next_vehicle_id = 0
        self.next_ped_id = 0
        # (t, id, id) of every pair of overlapping footprints
        self.overlaps: List[Tuple[int, int, int]] = []
        self.decisions = {}
        self.case_focus = None

    # -- construction -----------------------------------------------------
    @classmethod
    def from_frame(cls, world, frame, config=None, rng=None):
        """rebuild a simulator from a recorded frame (routes and arc lengths are recovered by projection)"""
        sim = cls(world, config, rng, ep=frame.ep)
        cfg = sim.config
        sim.t = frame.t
        sim.timer = frame.lights.timer if frame.lights.timer is not None else cfg.lights.timer_for(frame.lights)
        for vs in frame.vehicles:
            route = world.route(vs.lane, vs.intent)
            s, _ = route.project(vs.x, vs.y, refine=True)
            agent = Agent(vs.id, route, s, vs.v, vs.a, length=cfg.policy.vehicle_length)
            agent.committed = agent.front > route.s_stop + 0.01
            sim.agents[vs.id] = agent
        for ps in frame.peds:
            cw = sim._crosswalk_near(ps.x, ps.y) if ps.crosswalk is None else world.crosswalk(ps.crosswalk)
            if cw is None:
                continue
            pos = ps.x if cw.axis == 'x' else ps.y
            direction = (-math.copysign(1.0, pos) if ps.direction is None
                         else (ps.direction[0] if cw.axis == 'x' else ps.direction[1]))
            speed = ps.speed if ps.speed is not None else float(np.mean(cfg.ped_speed))
            walker = Walker(ps.id, cw, ps.x, ps.y, speed, direction)
            walker.walking = walker.on_road(world.config.box_half)
            sim.walkers[ps.id] = walker
        sim.next_vehicle_id = max(sim.agents, default=-1) + 1
        sim.next_ped_id = max(sim.walkers, default=-1) + 1
        # the recorded command is applied on the next step; decisions only supply hold/commit flags
        sim._decide(apply=False)
        return sim

    def _crosswalk_near(self, x, y, margin=1.5):
        for cw in self.world.crosswalks:
            r = cw.rect
            if r.xmin - margin <= x <= r.xmax + margin and r.ymin - margin <= y <= r.ymax + margin:
                return cw
        return None

    @property
    def lights(self):
        return self.config.lights.state(self.timer)

    def scene(self):
        return Scene([self.agents[k] for k in sorted(self.agents)],
                     [self.walkers[k] for k in sorted(self.walkers)], self.lights)

    # -- spawning ---------------------------------------------------------
    def _lane_free(self, route, s):
        x, y, _ = route.pose(s)
        for agent in self.agents.values():
            ax, ay, _ = agent.pose()
            if math.hypot(ax - x, ay - y) < self.config.spawn_clearance:
                return False
        return True

    def spawn_vehicle(self, lane_id, intent, s=None, v=None):
        """place a vehicle on a route; returns the new id or None when the entry is occupied"""
        route = self.world.route(lane_id, intent)
        length = self.config.policy.vehicle_length
        s = length / 2.0 + 0.5 if s is None else s
        if not self._lane_free(route, s):
            return None
        if v is None:
            lo, hi = self.config.initial_speed
            v = self.rng.uniform(lo, hi) * self.config.policy.idm.v0
        vid = self.next_vehicle_id
        self.next_vehicle_id += 1
        agent = Agent(vid, route, float(s), float(v), length=length)
        agent.committed = agent.front > route.s_stop + 0.01
        self.agents[vid] = agent
        return vid

    def spawn_pedestrian(self, crosswalk, walking=False, position=None):
        cfg, box = self.config, self.world.config.box_half
        side = 1.0 if self.rng.random() < 0.5 else -1.0
        r = crosswalk.rect
        if crosswalk.axis == 'x':
            lateral = self.rng.uniform(r.ymin + 0.4, r.ymax - 0.4)
        else:
            lateral = self.rng.uniform(r.xmin + 0.4, r.xmax - 0.4)
        along = side * (box + 1.0) if position is None else position
        x, y = (along, lateral) if crosswalk.axis == 'x' else (lateral, along)
        pid = self.next_ped_id
        self.next_ped_id += 1
        speed = self.rng.uniform(*cfg.ped_speed)
        direction = -side if position is None else -math.copysign(1.0, position)
        self.walkers[pid] = Walker(pid, crosswalk, x, y, speed, direction, walking)
        return pid

    def _random_lane_intent(self, biased=False):
        world = self.world
        if biased and self.case_focus is not None:
            options = self.case_focus
            return options[int(self.rng.integers(len(options)))]
        lanes = world.inbound_lanes()
        lane = lanes[int(self.rng.integers(len(lanes)))]
        intent = lane.intentions[int(self.rng.integers(len(lane.intentions)))]
        return lane.id, intent

    def _lane_id(self, approach, index):
        return 3 * APPROACHES.index(approach) + index

    def reset(self, case=None):
        """initial vehicles, pedestrians and signal phase of the episode; returns the first frame"""
        if self.rng is None:
            raise ConfigurationError("reset needs a random generator")
        cfg = self.config
        self.case = case if case is not None else self.case
        cycle = cfg.lights
        approach = APPROACHES[int(self.rng.integers(len(APPROACHES)))]
        group = LIGHT_GROUP[approach]
        green_start = 0.0 if group == 'ns' else cycle.green + cycle.yellow
        stop_s = self.world.route(self._lane_id(approach, 0), 'F').s_stop

        if self.case == 'unprotected_left':
            self.timer = green_start + self.rng.uniform(0.0, 4.0)
            opp = OPPOSITE[approach]
            self.case_focus = [(self._lane_id(approach, 0), 'L'), (self._lane_id(opp, 0), 'F'),
                               (self._lane_id(opp, 1), 'F'), (self._lane_id(opp, 0), 'L'),
                               (self._lane_id(approach, 0), 'F'), (self._lane_id(approach, 1), 'F')]
            self.spawn_vehicle(self._lane_id(approach, 0), 'L', s=stop_s - self.rng.uniform(12.0, 25.0),
                               v=self.rng.uniform(5.0, 9.0))
            self.spawn_vehicle(self._lane_id(opp, int(self.rng.integers(2))), 'F',
                               s=stop_s - self.rng.uniform(5.0, 25.0), v=self.rng.uniform(8.0, 12.0))
        elif self.case == 'right_merge':
            self.timer = (green_start + cycle.green + cycle.yellow + self.rng.uniform(0.0, 4.0)) % cycle.period
            cross = approach_for_heading(APPROACH_HEADING[approach] - 90.0)
            self.case_focus = [(self._lane_id(approach, 2), 'R'), (self._lane_id(cross, 2), 'F'),
                               (self._lane_id(cross, 1), 'F'), (self._lane_id(approach, 2), 'F')]
            self.spawn_vehicle(self._lane_id(approach, 2), 'R', s=stop_s - self.rng.uniform(8.0, 20.0),
                               v=self.rng.uniform(4.0, 8.0))
            for k in range(1 + int(self.rng.integers(2))):
                self.spawn_vehicle(self._lane_id(cross, 2), 'F', s=stop_s - 5.0 - 18.0 * k - self.rng.uniform(0.0, 8.0),
                                   v=self.rng.uniform(8.0, 12.0))
        elif self.case == 'pedestrian':
            # turning traffic of the other group crosses the N/S crosswalks while they may be walked
            cw = self.world.crosswalks[int(self.rng.integers(len(self.world.crosswalks)))] \
                if self.world.crosswalks else None
            turn_from = approach if group != (cw.walk_group if cw else group) else \
                approach_for_heading(APPROACH_HEADING[approach] - 90.0)
            turn_group = LIGHT_GROUP[turn_from]
            self.timer = (0.0 if turn_group == 'ns' else cycle.green + cycle.yellow) + self.rng.uniform(0.0, 4.0)
            self.case_focus = [(self._lane_id(a, 0), 'L') for a in APPROACHES if LIGHT_GROUP[a] == turn_group] + \
                              [(self._lane_id(a, 2), 'R') for a in APPROACHES if LIGHT_GROUP[a] == turn_group]
            lane_id, intent = self.case_focus[int(self.rng.integers(len(self.case_focus)))]
            self.spawn_vehicle(lane_id, intent, s=stop_s - self.rng.uniform(5.0, 20.0), v=self.rng.uniform(6.0, 10.0))
            if cw is not None:
                box = self.world.config.box_half
                for _ in range(1 + int(self.rng.integers(2))):
                    self.spawn_pedestrian(cw, walking=True, position=self.rng.uniform(-box + 1.0, box - 1.0))
        else:
            self.timer = self.rng.uniform(0.0, cycle.period)
            self.case_focus = None

        target = int(self.rng.integers(cfg.min_vehicles, cfg.max_vehicles + 1))
        tries = 0
        while len(self.agents) < target and tries < 200:
            tries += 1
            lane_id, intent = self._random_lane_intent(biased=self.rng.random() < cfg.case_bias)
            route = self.world.route(lane_id, intent)
            self.spawn_vehicle(lane_id, intent, s=self.rng.uniform(3.0, route.s_stop - 6.0))
        self._decide()
        return self.snapshot()

    # -- dynamics ---------------------------------------------------------
    def _decide(self, apply=True):
        scene = self.scene()
        self.decisions = {a.id: behavior_policy(self.world, scene, a, self.config.policy) for a in scene.agents}
        if apply:
            for a in scene.agents:
                a.a = self._applied_accel(a, self.decisions[a.id])
        return self.decisions

    def _applied_accel(self, agent, decision):
        dt, idm = self.config.dt, self.config.policy.idm
        a = decision.accel
        v_next = max(agent.v + a * dt, 0.0)
        if decision.hold:
            room = agent.route.s_stop - agent.front
            if room - v_next * dt <= 0.5 or room <= 0.5:
                # snap to the stop line when a stop from here is within the emergency bound
                v_next = 0.0 if agent.v <= idm.b_hard * dt else max(agent.v - idm.b_hard * dt, 0.0)
        return (v_next - agent.v) / dt

    def _advance(self):
        cfg, world = self.config, self.world
        dt = cfg.dt
        box = world.config.box_half
        for vid in sorted(self.agents):
            agent = self.agents[vid]
            decision = self.decisions.get(vid)
            s_next, v_next = advance_along(agent.s, agent.v, agent.a, dt)
            s_line = agent.route.s_stop - agent.length / 2.0
            if decision is not None and decision.hold and agent.s <= s_line + 1e-9:
                if s_next >= s_line:
                    s_next, v_next = s_line, 0.0
                elif s_line - s_next <= 0.5 and v_next == 0.0 < agent.v:
                    s_next = s_line
            if decision is not None and decision.commit:
                agent.committed = True
            agent.s, agent.v = s_next, v_next
            if agent.front > agent.route.s_stop + 0.01:
                agent.committed = True
        for vid in [k for k, a in self.agents.items() if a.front >= a.route.length]:
            del self.agents[vid]

        lights = cfg.lights.state(self.timer + dt)
        for pid in sorted(self.walkers):
            w = self.walkers[pid]
            if not w.walking and lights[w.crosswalk.walk_group] == 'R' and not w.on_road(box):
                w.walking = True
            if w.walking:
                step = w.direction * w.speed * dt
                if w.crosswalk.axis == 'x':
                    w.x += step
                else:
                    w.y += step
            if w.position * w.direction > box + 1.0:
                del self.walkers[pid]

        self.timer = (self.timer + dt) % cfg.lights.period
        self.t += 1

    def _respawn(self):
        cfg = self.config
        if self.rng is None:
            return
        if len(self.agents) < cfg.min_vehicles or \
                (len(self.agents) < cfg.max_vehicles and self.rng.random() < cfg.spawn_prob):
            lane_id, intent = self._random_lane_intent(biased=self.rng.random() < cfg.case_bias)
            self.spawn_vehicle(lane_id, intent)
        rate = cfg.ped_case_rate if self.case == 'pedestrian' else cfg.ped_rate
        for cw in self.world.crosswalks:
            count = sum(1 for w in self.walkers.values() if w.crosswalk.id == cw.id)
            if count < cfg.max_peds_per_crosswalk and self.rng.random() < rate * cfg.dt:
                self.spawn_pedestrian(cw)

    @property
    def collisions(self):
        return len(self.overlaps)

    def _check_collisions(self):
        policy = self.config.policy
        agents = [self.agents[k] for k in sorted(self.agents)]
        boxes = [vehicle_corners(*a.pose(), policy.vehicle_length, policy.vehicle_width) for a in agents]
        for i in range(len(agents)):
            for j in range(i + 1, len(agents)):
                if boxes_overlap(boxes[i], boxes[j]):
                    self.overlaps.append((self.t, agents[i].id, agents[j].id))
                    logger.warning("episode %d t=%d: vehicles %d and %d overlap",
                                   self.ep, self.t, agents[i].id, agents[j].id)

    def step(self):
        """advance one tick; returns the new frame"""
        self._advance()
        self._respawn()
        self._check_collisions()
        self._decide()
        return self.snapshot()

    def snapshot(self):
        vehicles = []
        for vid in sorted(self.agents):
            agent = self.agents[vid]
            x, y, h = agent.pose()
            vehicles.append(VehicleState(vid, float(x), float(y), float(wrap_degrees(h)), float(agent.v),
                                         float(agent.a), agent.lane, agent.intent))
        peds = []
        for pid in sorted(self.walkers):
            w = self.walkers[pid]
            direction = (w.direction, 0.0) if w.crosswalk.axis == 'x' else (0.0, w.direction)
            peds.append(PedestrianState(pid, float(w.x), float(w.y), float(w.speed), w.crosswalk.id, direction))
        return Frame(self.t, self.lights, tuple(vehicles), tuple(peds), self.ep)

    def run(self, n_frames=None):
        n_frames = self.config.episode_length if n_frames is None else n_frames
        frames = [self.reset()]
        while len(frames) < n_frames:
            frames.append(self.step())
        return frames


def step(world, frame, dt=0.2, rng=None, config=None):
    """
    Advance a recorded frame by one tick. Without `rng` nothing is spawned.
    """
    config = config or SimConfig()
    if dt != config.dt:
        config = SimConfig.from_dict({**config.to_dict(), 'dt': dt})
    sim = IntersectionSimulator.from_frame(world, frame, config, rng)
    return sim.step()
