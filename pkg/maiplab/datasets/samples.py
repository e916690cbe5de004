# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Optional

import numpy as np

from maiplab.datasets.encoder import (EncoderConfig, encode_static, encode_dynamic, extract_vehicle_map,
                                      vehicle_state_vector)
from maiplab.datasets.mask import MaskConfig, apply_mask
from maiplab.sim.idm import FREE_ROAD_GAP
from maiplab.sim.world import build_world
from maiplab.utils import wrap_degrees


logger = logging.getLogger(__name__)


@dataclass
class TrainingSample:
    """
    Inputs and labels of one (vehicle, time) pair. Index t is the last
    history frame; y holds (v, theta) at t+1 .. t+Tp.
    """
    x1: np.ndarray
    x2: np.ndarray
    x3: np.ndarray
    x4: np.ndarray
    y: Optional[np.ndarray]
    vehicle_id: int
    t: int
    ep: int = 0
    lane: int = 0
    intent: str = 'F'
    resolution: float = 2.0
    # route tangent and same-lane leader at t, used by the car-following baseline
    lane_heading: float = 0.0
    leader_gap: float = FREE_ROAD_GAP
    leader_speed: float = 0.0

    @property
    def th(self):
        return self.x4.shape[0]

    @property
    def tp(self):
        return 0 if self.y is None else self.y.shape[0]


class GridEncoder:
    """
    Scene encoder bound to one world: the static map is computed once and
    shared by every sample.
    """

    def __init__(self, world=None, resolution=2.0, encoder_config=None, mask_config=None, use_mask=True):
        self.world = world if world is not None else build_world()
        self.config = encoder_config or EncoderConfig(resolution=resolution)
        self.mask_config = mask_config or MaskConfig()
        self.use_mask = use_mask
        self.x1 = encode_static(self.world, self.config.resolution)

    @property
    def resolution(self):
        return self.config.resolution

    @property
    def grid_size(self):
        return self.x1.shape[0]

    def dynamic(self, frame):
        return encode_dynamic(frame, self.world, self.config.resolution, self.config)

    def vehicle_maps(self, frame, vehicle_id, dynamic=None):
        """(X2 as fed to the network, X3) of one vehicle at one frame"""
        dynamic = self.dynamic(frame) if dynamic is None else dynamic
        x3 = extract_vehicle_map(dynamic, frame, vehicle_id, self.config, self.world.extent)
        if not self.use_mask:
            return dynamic, x3
        x2 = apply_mask(frame, vehicle_id, dynamic, self.world, self.config.resolution, self.mask_config)
        return x2, x3

    def leader(self, frame, vehicle_id):
        """(gap, speed) of the nearest vehicle ahead in the same lane"""
        ego = frame.vehicle(vehicle_id)
        route = self.world.route(ego.lane, ego.intent)
        s_ego, _ = route.project(ego.x, ego.y, refine=True)
        best = (FREE_ROAD_GAP, 0.0)
        for other in frame.vehicles:
            if other.id == ego.id or other.lane != ego.lane:
                continue
            s_other, _ = route.project(other.x, other.y, refine=True)
            gap = s_other - s_ego - self.config.vehicle_length
            if s_other > s_ego and gap < best[0]:
                best = (max(gap, 0.0), other.v)
        return best

    def lane_heading(self, frame, vehicle_id):
        ego = frame.vehicle(vehicle_id)
        route = self.world.route(ego.lane, ego.intent)
        s_ego, _ = route.project(ego.x, ego.y, refine=True)
        return float(wrap_degrees(route.pose(s_ego)[2]))


class IntersectionDataset:
    """
    Lazily encoded training samples of a list of episodes.

    One sample per (vehicle, t) with Th-1 <= t <= N-Tp-1 and the vehicle
    present in every frame of the window t-Th+1 .. t+Tp.
    """

    def __init__(self, episodes, encoder=None, th=5, tp=5, cache_size=4096):
        self.episodes = list(episodes)
        self.encoder = encoder or GridEncoder()
        self.th = th
        self.tp = tp
        self.index = []
        for e_idx, episode in enumerate(self.episodes):
            self.index.extend((e_idx, t, vid) for t, vid in window_index(episode.frames, th, tp))
        self._dynamic = lru_cache(maxsize=cache_size)(self._dynamic_uncached)
        self._maps = lru_cache(maxsize=cache_size)(self._maps_uncached)

    def __len__(self):
        return len(self.index)

    def _frame(self, e_idx, t):
        return self.episodes[e_idx].frames[t]

    def _dynamic_uncached(self, e_idx, t):
        return self.encoder.dynamic(self._frame(e_idx, t))

    def _maps_uncached(self, e_idx, t, vehicle_id):
        return self.encoder.vehicle_maps(self._frame(e_idx, t), vehicle_id, self._dynamic(e_idx, t))

    def __getitem__(self, idx):
        e_idx, t, vid = self.index[idx]
        frames = self.episodes[e_idx].frames
        history = range(t - self.th + 1, t + 1)
        maps = [self._maps(e_idx, k, vid) for k in history]
        x4 = np.stack([vehicle_state_vector(frames[k], vid) for k in history])
        future = [frames[k].vehicle(vid) for k in range(t + 1, t + self.tp + 1)]
        y = np.array([[v.v, v.theta] for v in future], dtype=np.float64)
        now = frames[t].vehicle(vid)
        gap, speed = self.encoder.leader(frames[t], vid)
        return TrainingSample(
            x1=self.encoder.x1, x2=np.stack([m[0] for m in maps]), x3=np.stack([m[1] for m in maps]),
            x4=x4, y=y, vehicle_id=vid, t=frames[t].t, ep=frames[t].ep, lane=now.lane, intent=now.intent,
            resolution=self.encoder.resolution, lane_heading=self.encoder.lane_heading(frames[t], vid),
            leader_gap=gap, leader_speed=speed)

    def __iter__(self):
        for idx in range(len(self)):
            yield self[idx]


def window_index(frames, th, tp):
    """(t, vehicle id) pairs whose full history and future windows exist"""
    n = len(frames)
    if n < th + tp:
        return []
    present = [set(f.vehicle_ids) for f in frames]
    out = []
    for t in range(th - 1, n - tp):
        common = set.intersection(*present[t - th + 1:t + tp + 1])
        out.extend((t, vid) for vid in sorted(common))
    return out


def make_training_samples(episode, th=5, tp=5, encoder=None) -> List[TrainingSample]:
    """
    All samples of one episode; an episode shorter than Th + Tp yields none.
    """
    return list(IntersectionDataset([episode], encoder, th, tp))


def scene_histories(frames, encoder, vehicle_ids=None):
    """
    Prediction inputs for every vehicle present in all of `frames` (the Th
    history frames, oldest first). Vehicles missing from the window are skipped
    with a notice.

    Returns:
        list of TrainingSample with y = None
    """
    frames = list(frames)
    now = frames[-1]
    present = set.intersection(*(set(f.vehicle_ids) for f in frames))
    wanted = now.vehicle_ids if vehicle_ids is None else list(vehicle_ids)
    dynamic = [encoder.dynamic(f) for f in frames]
    out = []
    for vid in wanted:
        if vid not in present:
            logger.info("vehicle %s is not present over the whole history window, skipped", vid)
            continue
        maps = [encoder.vehicle_maps(f, vid, d) for f, d in zip(frames, dynamic)]
        gap, speed = encoder.leader(now, vid)
        vehicle = now.vehicle(vid)
        out.append(TrainingSample(
            x1=encoder.x1, x2=np.stack([m[0] for m in maps]), x3=np.stack([m[1] for m in maps]),
            x4=np.stack([vehicle_state_vector(f, vid) for f in frames]), y=None, vehicle_id=vid, t=now.t,
            ep=now.ep, lane=vehicle.lane, intent=vehicle.intent, resolution=encoder.resolution,
            lane_heading=encoder.lane_heading(now, vid), leader_gap=gap, leader_speed=speed))
    return out
