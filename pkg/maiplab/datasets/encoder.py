# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Integer-coded raster encodings of the intersection.

Cell (row, col) covers x in [-E/2 + col r, -E/2 + (col + 1) r) and
y in (E/2 - (row + 1) r, E/2 - row r], i.e. row 0 is the northern edge.
"""

import math
from collections import OrderedDict
from dataclasses import dataclass, replace

import numpy as np

from maiplab.errors import ConfigurationError
from maiplab.sim.world import APPROACHES, LIGHT_GROUP, Rect, WorldConfig


CODE_TABLE_VERSION = 1

# lanes are coded by their direction of travel
STATIC_CODES = OrderedDict([
    ('empty', 0),
    ('lane_north', 1),
    ('lane_south', 2),
    ('lane_east', 3),
    ('lane_west', 4),
    ('junction', 5),
    ('crosswalk', 6),
    ('sidewalk', 7),
    ('infeasible', 8),
    ('light', 9),
])

DYNAMIC_CODES = OrderedDict([
    ('empty', 0),
    ('vehicle', 1),
    ('pedestrian', 2),
    ('light_green', 3),
    ('light_red', 4),
    ('light_yellow', 5),
])

LIGHT_CODES = {'G': DYNAMIC_CODES['light_green'], 'R': DYNAMIC_CODES['light_red'], 'Y': DYNAMIC_CODES['light_yellow']}
# one-hot order of the governing light in X4
LIGHT_ONE_HOT = ('R', 'G', 'Y')
X4_DIM = 5 + len(LIGHT_ONE_HOT)
# side of the square every grid covers unless a world says otherwise
DEFAULT_EXTENT = WorldConfig().extent

_EPS = 1e-9


@dataclass(frozen=True)
class EncoderConfig:
    resolution: float = 2.0
    vehicle_length: float = 4.5
    vehicle_width: float = 2.0
    ped_diameter: float = 0.6


def grid_size(extent, resolution):
    n = extent / resolution
    if resolution <= 0 or abs(n - round(n)) > 1e-9:
        raise ConfigurationError(f"resolution {resolution} m does not divide the {extent} m extent")
    return int(round(n))


def cell_index(x, y, extent, resolution):
    """(row, col) of the cell containing (x, y); may fall outside the grid"""
    half = extent / 2.0
    return int(math.floor((half - y) / resolution)), int(math.floor((x + half) / resolution))


def cell_centers(extent, resolution):
    """(xs, ys) arrays of shape [R, R]"""
    n = grid_size(extent, resolution)
    half = extent / 2.0
    c = (np.arange(n) + 0.5) * resolution
    return np.meshgrid(-half + c, half - c)


def lane_direction_code(heading):
    h = round((heading % 360.0) / 90.0) % 4
    return STATIC_CODES[('lane_east', 'lane_north', 'lane_west', 'lane_south')[h]]


def lane_rect(world, lane):
    (x0, y0), (x1, y1) = lane.centerline
    w = world.config.lane_width / 2.0
    if abs(x1 - x0) < abs(y1 - y0):
        return Rect(min(x0, x1) - w, max(x0, x1) + w, min(y0, y1), max(y0, y1))
    return Rect(min(x0, x1), max(x0, x1), min(y0, y1) - w, max(y0, y1) + w)


def static_layers(world, resolution):
    """
    Ordered (code, cell mask) layers of the static map; later layers paint over
    earlier ones. A cell belongs to a region when its centre does.
    """
    xs, ys = cell_centers(world.extent, resolution)
    layers = []
    for lane in world.lanes:
        layers.append((lane_direction_code(lane.heading), lane_rect(world, lane).contains(xs, ys)))
    if world.lanes:
        b = world.config.box_half
        layers.append((STATIC_CODES['junction'], Rect(-b, b, -b, b).contains(xs, ys)))
    for cw in world.crosswalks:
        layers.append((STATIC_CODES['crosswalk'], cw.rect.contains(xs, ys)))
    for rect in world.sidewalks:
        layers.append((STATIC_CODES['sidewalk'], rect.contains(xs, ys)))
    for rect in world.infeasible:
        layers.append((STATIC_CODES['infeasible'], rect.contains(xs, ys)))
    n = xs.shape[0]
    for approach in APPROACHES:
        if approach in world.lights:
            mask = np.zeros((n, n), dtype=bool)
            row, col = cell_index(*world.lights[approach], world.extent, resolution)
            if 0 <= row < n and 0 <= col < n:
                mask[row, col] = True
            layers.append((STATIC_CODES['light'], mask))
    return layers


def rasterize_layers(layers, size):
    grid = np.zeros((size, size), dtype=np.int8)
    for code, mask in layers:
        grid[mask] = code
    return grid


def encode_static(world, resolution=2.0):
    """X1: the static map of `world`"""
    size = grid_size(world.extent, resolution)
    return rasterize_layers(static_layers(world, resolution), size)


def decode_static(grid):
    """per-code cell masks of a static grid, in code order"""
    grid = np.asarray(grid)
    return [(code, grid == code) for name, code in STATIC_CODES.items() if name != 'empty']


def box_footprint(x, y, theta, length, width, extent, resolution):
    """
    Cells whose interior overlaps the oriented box centred at (x, y) with
    heading `theta` (degrees), by a separating-axis test.
    """
    n = grid_size(extent, resolution)
    half, h = extent / 2.0, resolution / 2.0
    c, s = math.cos(math.radians(theta)), math.sin(math.radians(theta))
    ex = 0.5 * length * abs(c) + 0.5 * width * abs(s)
    ey = 0.5 * length * abs(s) + 0.5 * width * abs(c)
    mask = np.zeros((n, n), dtype=bool)
    r0, c0 = cell_index(x - ex, y + ey, extent, resolution)
    r1, c1 = cell_index(x + ex, y - ey, extent, resolution)
    r0, c0, r1, c1 = max(r0, 0), max(c0, 0), min(r1, n - 1), min(c1, n - 1)
    if r0 > r1 or c0 > c1:
        return mask
    rows, cols = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    dx = -half + (cols + 0.5) * resolution - x
    dy = half - (rows + 0.5) * resolution - y
    cell_r = h * (abs(c) + abs(s))
    hit = ((np.abs(dx) < h + ex - _EPS) & (np.abs(dy) < h + ey - _EPS)
           & (np.abs(dx * c + dy * s) < 0.5 * length + cell_r - _EPS)
           & (np.abs(-dx * s + dy * c) < 0.5 * width + cell_r - _EPS))
    mask[r0:r1 + 1, c0:c1 + 1] = hit
    return mask


def disc_footprint(x, y, diameter, extent, resolution):
    """cells whose interior overlaps the disc"""
    n = grid_size(extent, resolution)
    half, h, r = extent / 2.0, resolution / 2.0, diameter / 2.0
    mask = np.zeros((n, n), dtype=bool)
    r0, c0 = cell_index(x - r, y + r, extent, resolution)
    r1, c1 = cell_index(x + r, y - r, extent, resolution)
    r0, c0, r1, c1 = max(r0, 0), max(c0, 0), min(r1, n - 1), min(c1, n - 1)
    if r0 > r1 or c0 > c1:
        return mask
    rows, cols = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    dx = np.maximum(np.abs(-half + (cols + 0.5) * resolution - x) - h, 0.0)
    dy = np.maximum(np.abs(half - (rows + 0.5) * resolution - y) - h, 0.0)
    mask[r0:r1 + 1, c0:c1 + 1] = np.hypot(dx, dy) < r - _EPS
    return mask


def vehicle_footprint(vehicle, extent, config):
    return box_footprint(vehicle.x, vehicle.y, vehicle.theta, config.vehicle_length, config.vehicle_width,
                         extent, config.resolution)


def encode_dynamic(frame, world, resolution=2.0, config=None):
    """
    X2: light colors at the light positions, then vehicle boxes, then
    pedestrian discs.
    """
    config = config or EncoderConfig(resolution=resolution)
    if config.resolution != resolution:
        config = EncoderConfig(resolution, config.vehicle_length, config.vehicle_width, config.ped_diameter)
    size = grid_size(world.extent, resolution)
    grid = np.zeros((size, size), dtype=np.int8)
    for approach, pos in world.lights.items():
        row, col = cell_index(*pos, world.extent, resolution)
        if 0 <= row < size and 0 <= col < size:
            grid[row, col] = LIGHT_CODES[frame.lights[LIGHT_GROUP[approach]]]
    for vehicle in frame.vehicles:
        grid[vehicle_footprint(vehicle, world.extent, config)] = DYNAMIC_CODES['vehicle']
    for ped in frame.peds:
        grid[disc_footprint(ped.x, ped.y, config.ped_diameter, world.extent, resolution)] = \
            DYNAMIC_CODES['pedestrian']
    return grid


def extract_vehicle_map(dynamic, frame, vehicle_id, config=None, extent=DEFAULT_EXTENT):
    """
    X3: only the selected vehicle's footprint, taken from the dynamic map.

    The cell size is the one of `dynamic` over the world extent, whatever
    resolution `config` names; only its vehicle box is used.

    Raises:
        KeyError: the vehicle is not in the frame
    """
    dynamic = np.asarray(dynamic)
    resolution = extent / dynamic.shape[0]
    config = replace(config or EncoderConfig(), resolution=resolution)
    vehicle = frame.vehicle(vehicle_id)
    footprint = vehicle_footprint(vehicle, extent, config) & (dynamic != 0)
    out = np.zeros_like(dynamic)
    out[footprint] = DYNAMIC_CODES['vehicle']
    return out


def governing_light(frame, vehicle_id):
    vehicle = frame.vehicle(vehicle_id)
    return frame.lights[LIGHT_GROUP[APPROACHES[vehicle.lane // 3]]]


def vehicle_state_vector(frame, vehicle_id):
    """
    X4 row: (x, y, theta, v, a) followed by the one-hot [R, G, Y] of the light
    governing the vehicle's approach.
    """
    vehicle = frame.vehicle(vehicle_id)
    one_hot = [1.0 if governing_light(frame, vehicle_id) == c else 0.0 for c in LIGHT_ONE_HOT]
    return np.array([vehicle.x, vehicle.y, vehicle.theta, vehicle.v, vehicle.a] + one_hot, dtype=np.float64)


def code_scale(codes):
    return float(max(codes.values()))
