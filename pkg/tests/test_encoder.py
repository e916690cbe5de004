# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import math

import numpy as np
import pytest
import torch

from conftest import COARSE_RESOLUTION, constant_velocity_frames, straight_frame
from maiplab.datasets import (DYNAMIC_CODES, LIGHT_CODES, STATIC_CODES, GridEncoder, IntersectionDataset,
                              RandomSampler, apply_mask, box_footprint, build_mask, cell_index, collate,
                              decode_static, encode_dynamic, encode_static, extract_vehicle_map, get_data_loader,
                              make_training_samples, scene_histories, split_episodes, vehicle_state_vector)
from maiplab.errors import ShapeError
from maiplab.sim import FREE_ROAD_GAP, Episode, Frame, LightState, PedestrianState, VehicleState, WorldMap


def light_cells(world, resolution=2.0):
    return {cell_index(*pos, world.extent, resolution) for pos in world.lights.values()}


class TestStatic:
    def test_empty_map(self):
        grid = encode_static(WorldMap.empty(), 2.0)
        assert grid.shape == (50, 50)
        assert not grid.any()

    def test_light_cells(self, world):
        grid = encode_static(world, 2.0)
        assert grid.shape == (50, 50)
        for row, col in light_cells(world):
            assert grid[row, col] == STATIC_CODES['light']

    def test_layers_present(self, world):
        grid = encode_static(world, 2.0)
        present = set(np.unique(grid))
        for name in ('lane_north', 'lane_south', 'lane_east', 'lane_west', 'junction', 'crosswalk', 'sidewalk',
                     'infeasible', 'light'):
            assert STATIC_CODES[name] in present

    def test_deterministic(self, world):
        np.testing.assert_array_equal(encode_static(world, 2.0), encode_static(world, 2.0))

    def test_decode_static_partitions_cells(self, world):
        grid = encode_static(world, 2.0)
        layers = decode_static(grid)
        covered = np.sum([mask for _, mask in layers], axis=0)
        np.testing.assert_array_equal(covered, (grid != 0).astype(int))

    def test_resolution_must_divide_extent(self, world):
        with pytest.raises(ValueError):
            encode_static(world, 3.0)


class TestDynamic:
    def test_only_red_markers(self, world):
        grid = encode_dynamic(Frame(0, LightState('R', 'R')), world, 2.0)
        rows, cols = np.nonzero(grid)
        assert set(zip(rows.tolist(), cols.tolist())) == light_cells(world)
        assert set(grid[grid != 0].tolist()) == {LIGHT_CODES['R']}

    def test_axis_aligned_vehicle(self, world):
        vehicle = VehicleState(0, 1.0, 1.0, 0.0, 0.0, 0.0, 7, 'F')
        grid = encode_dynamic(Frame(0, LightState('G', 'R'), (vehicle,)), world, 2.0)
        rows, cols = np.nonzero(grid == DYNAMIC_CODES['vehicle'])
        assert set(zip(rows.tolist(), cols.tolist())) == {(24, 24), (24, 25), (24, 26)}

    def test_vehicle_and_pedestrian(self, world):
        vehicle = VehicleState(0, 1.0, 1.0, 0.0, 0.0, 0.0, 7, 'F')
        ped = PedestrianState(0, -21.0, 21.0)
        grid = encode_dynamic(Frame(0, LightState('G', 'R'), (vehicle,), (ped,)), world, 2.0)
        assert np.count_nonzero(grid == DYNAMIC_CODES['vehicle']) == 3
        assert np.count_nonzero(grid == DYNAMIC_CODES['pedestrian']) == 1
        assert grid[14, 14] == DYNAMIC_CODES['pedestrian']


class TestVehicleMap:
    def test_single_vehicle_drops_lights(self, world):
        frame = straight_frame(world)
        dynamic = encode_dynamic(frame, world, 2.0)
        x3 = extract_vehicle_map(dynamic, frame, 0)
        expected = np.where(dynamic == DYNAMIC_CODES['vehicle'], dynamic, 0)
        np.testing.assert_array_equal(x3, expected)

    def test_other_vehicles_excluded(self, world):
        first = straight_frame(world).vehicle(0)
        x, y, theta = world.route(1, 'F').pose(5.0)
        other = VehicleState(1, float(x), float(y), float(theta), 5.0, 0.0, 1, 'F')
        frame = Frame(0, LightState('G', 'R'), (first, other))
        dynamic = encode_dynamic(frame, world, 2.0)
        x3 = extract_vehicle_map(dynamic, frame, 0)
        row, col = cell_index(other.x, other.y, world.extent, 2.0)
        assert x3[row, col] == 0
        assert dynamic[row, col] == DYNAMIC_CODES['vehicle']
        assert np.count_nonzero(x3) > 0

    def test_crop_follows_grid_resolution(self, world):
        frame = straight_frame(world)
        vehicle = frame.vehicle(0)
        dynamic = encode_dynamic(frame, world, COARSE_RESOLUTION)
        footprint = box_footprint(vehicle.x, vehicle.y, vehicle.theta, 4.5, 2.0, world.extent, COARSE_RESOLUTION)
        assert footprint.any()
        np.testing.assert_array_equal(extract_vehicle_map(dynamic, frame, 0) != 0, footprint)

    def test_unknown_vehicle(self, world):
        frame = straight_frame(world)
        with pytest.raises(KeyError):
            extract_vehicle_map(encode_dynamic(frame, world, 2.0), frame, 9)


class TestStateVector:
    def test_stationary_red(self, world):
        frame = straight_frame(world, v=0.0, a=0.0, lights=('R', 'G'))
        vehicle = frame.vehicle(0)
        x4 = vehicle_state_vector(frame, 0)
        np.testing.assert_array_equal(x4, [vehicle.x, vehicle.y, vehicle.theta, 0.0, 0.0, 1.0, 0.0, 0.0])

    def test_unknown_vehicle(self, world):
        with pytest.raises(KeyError):
            vehicle_state_vector(straight_frame(world), 3)


class TestMask:
    def test_identity_mask(self, world):
        frame = straight_frame(world)
        x2 = encode_dynamic(frame, world, 2.0)
        np.testing.assert_array_equal(apply_mask(frame, 0, x2, mask=np.ones_like(x2)), x2)

    def test_annihilating_mask(self, world):
        frame = straight_frame(world)
        x2 = encode_dynamic(frame, world, 2.0)
        assert not apply_mask(frame, 0, x2, mask=np.zeros_like(x2)).any()

    def test_idempotent(self, world):
        frame = straight_frame(world)
        x2 = encode_dynamic(frame, world, 2.0)
        once = apply_mask(frame, 0, x2, world, 2.0)
        np.testing.assert_array_equal(apply_mask(frame, 0, once, world, 2.0), once)

    def test_shape_mismatch(self, world):
        frame = straight_frame(world)
        with pytest.raises(ShapeError):
            apply_mask(frame, 0, np.zeros((50, 50)), mask=np.ones((10, 10)))

    def test_corridor_kept_cross_traffic_dropped(self, world):
        ego = straight_frame(world).vehicle(0)
        x, y, theta = world.route(7, 'F').pose(20.0)
        ahead = VehicleState(1, float(x), float(y), float(theta), 8.0, 0.0, 7, 'F')
        x, y, theta = world.route(10, 'F').pose(5.0)
        far_cross = VehicleState(2, float(x), float(y), float(theta), 8.0, 0.0, 10, 'F')
        frame = Frame(0, LightState('G', 'R'), (ego, ahead, far_cross))
        x2 = encode_dynamic(frame, world, 2.0)
        masked = apply_mask(frame, 0, x2, world, 2.0)
        ahead_cell = cell_index(ahead.x, ahead.y, world.extent, 2.0)
        cross_cell = cell_index(far_cross.x, far_cross.y, world.extent, 2.0)
        assert masked[ahead_cell] == DYNAMIC_CODES['vehicle']
        assert x2[cross_cell] == DYNAMIC_CODES['vehicle']
        assert masked[cross_cell] == 0

    def test_mask_is_binary(self, world):
        mask = build_mask(world, straight_frame(world), 0, 2.0)
        assert set(np.unique(mask).tolist()) <= {0, 1}
        assert mask.shape == (50, 50)

    @pytest.mark.slow
    def test_algebra_on_random_frames(self, world):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            frame = random_frame(world, rng)
            ego = int(rng.choice(frame.vehicle_ids))
            x2 = encode_dynamic(frame, world, 2.0)
            mask = build_mask(world, frame, ego, 2.0)
            assert set(np.unique(mask).tolist()) <= {0, 1}
            np.testing.assert_array_equal(apply_mask(frame, ego, x2, mask=np.ones_like(x2)), x2)
            assert not apply_mask(frame, ego, x2, mask=np.zeros_like(x2)).any()
            once = apply_mask(frame, ego, x2, mask=mask)
            np.testing.assert_array_equal(apply_mask(frame, ego, once, mask=mask), once)
            np.testing.assert_array_equal(once, x2 * mask)


def random_frame(world, rng, max_vehicles=8, max_peds=4):
    """vehicles at random points of random routes, pedestrians anywhere, random light colours"""
    lanes = world.inbound_lanes()
    half = world.extent / 2.0
    vehicles = []
    for vid in range(int(rng.integers(1, max_vehicles + 1))):
        lane = lanes[int(rng.integers(len(lanes)))]
        intent = lane.intentions[int(rng.integers(len(lane.intentions)))]
        route = world.route(lane.id, intent)
        x, y, theta = route.pose(rng.uniform(0.0, route.length))
        vehicles.append(VehicleState(vid, float(x), float(y), float(theta), float(rng.uniform(0.0, 12.0)), 0.0,
                                     lane.id, intent))
    peds = tuple(PedestrianState(pid, float(rng.uniform(-half, half)), float(rng.uniform(-half, half)))
                 for pid in range(int(rng.integers(0, max_peds + 1))))
    ns, ew = rng.choice(['R', 'G', 'Y'], size=2)
    return Frame(0, LightState(str(ns), str(ew)), tuple(vehicles), peds)


class TestSamples:
    def test_exact_window(self, world):
        episode = Episode(constant_velocity_frames(world, 10))
        samples = make_training_samples(episode, 5, 5, GridEncoder(world, COARSE_RESOLUTION))
        assert len(samples) == 1
        sample = samples[0]
        assert sample.t == 4
        assert sample.x2.shape == (5, 10, 10)
        assert sample.x3.shape == (5, 10, 10)
        assert sample.x4.shape == (5, 8)
        np.testing.assert_allclose(sample.y, [[8.0, 90.0]] * 5)

    def test_too_short(self, world):
        episode = Episode(constant_velocity_frames(world, 9))
        assert make_training_samples(episode, 5, 5, GridEncoder(world, COARSE_RESOLUTION)) == []

    def test_window_arithmetic(self, world, coarse_encoder):
        episode = Episode(constant_velocity_frames(world, 300, v=0.1))
        assert len(IntersectionDataset([episode], coarse_encoder, 5, 5)) == 291

    def test_free_road_leader(self, world, coarse_encoder):
        sample = make_training_samples(Episode(constant_velocity_frames(world, 10)), 5, 5, coarse_encoder)[0]
        assert sample.leader_gap == FREE_ROAD_GAP
        assert sample.lane_heading == pytest.approx(90.0)

    def test_scene_histories(self, episode, coarse_encoder):
        frames = episode.frames[:5]
        samples = scene_histories(frames, coarse_encoder)
        present = set.intersection(*(set(f.vehicle_ids) for f in frames))
        assert sorted(s.vehicle_id for s in samples) == sorted(present)
        assert all(s.y is None for s in samples)


class TestCollate:
    def test_last_and_stacked(self, coarse_samples):
        batch = collate(coarse_samples[:3])
        assert batch['x1'].shape == (1, 1, 10, 10)
        assert batch['x2'].shape == (3, 1, 10, 10)
        assert batch['x4'].shape == (3, 5, 8)
        assert batch['y'].shape == (3, 5, 2)
        stacked = collate(coarse_samples[:3], 'stacked')
        assert stacked['x3'].shape == (3, 5, 10, 10)
        assert batch['x2'].max() <= 1.0

    def test_empty_batch(self):
        with pytest.raises(ValueError):
            collate([])

    def test_torch_loader_yields_numpy_batches(self, coarse_samples):
        loader = get_data_loader(coarse_samples, batch_size=4, shuffle=False)
        assert isinstance(loader, torch.utils.data.DataLoader)
        assert len(loader) == math.ceil(len(coarse_samples) / 4)
        first = next(iter(loader))
        assert isinstance(first['x2'], np.ndarray)
        assert first['rng_keys'] == [(s.ep, s.t, s.vehicle_id) for s in coarse_samples[:4]]

    def test_loader_covers_dataset(self, coarse_samples):
        loader = get_data_loader(coarse_samples, batch_size=4, shuffle=True, seed=0)
        seen = [key for batch in loader for key in batch['rng_keys']]
        assert sorted(seen) == sorted((s.ep, s.t, s.vehicle_id) for s in coarse_samples)


class TestSampler:
    def test_seeded_epochs(self):
        a, b = RandomSampler(20, seed=3), RandomSampler(20, seed=3)
        assert list(a) == list(b)
        first = list(a)
        a.set_epoch(1)
        assert list(a) != first
        assert sorted(a) == list(range(20))

    def test_no_shuffle(self):
        assert list(RandomSampler(5, shuffle=False)) == [0, 1, 2, 3, 4]


def test_split_episodes_is_disjoint():
    episodes = [Episode([], metadata={'ep': k}) for k in range(10)]
    train, test = split_episodes(episodes, 0.2, seed=0)
    assert len(test) == 2
    assert sorted(e.ep for e in train + test) == list(range(10))
    again = split_episodes(episodes, 0.2, seed=0)
    assert [e.ep for e in again[1]] == [e.ep for e in test]


def test_split_keeps_single_episode_for_training():
    episodes = [Episode([], metadata={'ep': 0})]
    assert split_episodes(episodes, 0.2) == (episodes, [])
