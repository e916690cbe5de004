# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .world import (APPROACHES, APPROACH_HEADING, LIGHT_GROUP, LANE_TYPES, LANE_INTENTIONS, INTENTIONS,
                    WorldConfig, WorldMap, Lane, Crosswalk, Rect, Route, build_world)
from .idm import IDMParams, FREE_ROAD_GAP, idm_accel, idm_response, braking_distance
from .policy import PolicyConfig, Agent, Walker, Scene, Decision, behavior_policy
from .simulator import (SCENARIO_CASES, VehicleState, PedestrianState, LightState, Frame, Episode, LightCycle,
                        SimConfig, IntersectionSimulator, step)
from .generate import generate_episode, generate_dataset, load_dataset, load_world, read_frames, read_metadata
