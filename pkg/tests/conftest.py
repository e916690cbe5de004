# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import os

import numpy as np
import pytest

from maiplab.algorithms import name2alg
from maiplab.datasets import GridEncoder, make_training_samples
from maiplab.lighting.config import get_parser
from maiplab.sim import LightState, VehicleState, Frame, build_world, generate_dataset

# coarse grid keeping finite-difference checks and training steps fast
COARSE_RESOLUTION = 10.0


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale acceptance runs (set MAIP_RUN_SLOW=1)')


def pytest_collection_modifyitems(config, items):
    if os.environ.get('MAIP_RUN_SLOW') == '1':
        return
    skip_slow = pytest.mark.skip(reason='set MAIP_RUN_SLOW=1 to run')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope='session')
def world():
    return build_world()


@pytest.fixture(scope='session')
def episode():
    return generate_dataset(1, 3, n_frames=15)[0]


@pytest.fixture(scope='session')
def coarse_encoder(world):
    return GridEncoder(world, COARSE_RESOLUTION)


@pytest.fixture(scope='session')
def coarse_samples(episode, coarse_encoder):
    samples = make_training_samples(episode, 5, 5, coarse_encoder)
    assert samples
    return samples


def run_args(save_dir, algorithm='maip', **overrides):
    """run arguments as the lighting parser builds them, with the method's own defaults filled in"""
    args = get_parser().parse_args('')
    args.algorithm = algorithm
    args.grid_resolution = COARSE_RESOLUTION
    args.save_dir = str(save_dir)
    args.save_name = f'{algorithm}_0'
    for argument in name2alg[algorithm].get_argument():
        setattr(args, argument.name.lstrip('-'), argument.default)
    for key, value in overrides.items():
        setattr(args, key, value)
    return args


@pytest.fixture
def make_args(tmp_path):
    def _make(algorithm='maip', **overrides):
        return run_args(tmp_path, algorithm, **overrides)

    return _make


def straight_frame(world, v=10.0, a=0.0, s=5.0, lights=('G', 'R'), lane=7, intent='F'):
    """one vehicle on a straight approach segment"""
    x, y, theta = world.route(lane, intent).pose(s)
    vehicle = VehicleState(0, float(x), float(y), float(theta), v, a, lane, intent)
    return Frame(0, LightState(*lights), (vehicle,), ())


def constant_velocity_frames(world, n, v=8.0, s=2.0, lane=7, dt=0.2):
    """one vehicle driving straight up the south approach at constant speed"""
    x0, y0, theta = world.route(lane, 'F').pose(s)
    rad = np.radians(theta)
    frames = []
    for t in range(n):
        x = x0 + v * dt * t * np.cos(rad)
        y = y0 + v * dt * t * np.sin(rad)
        frames.append(Frame(t, LightState('G', 'R'), (VehicleState(0, float(x), float(y), theta, v, 0.0, lane, 'F'),)))
    return frames
