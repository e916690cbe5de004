# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Circle, Polygon, Rectangle  # noqa: E402

from maiplab.datasets.encoder import EncoderConfig, lane_rect  # noqa: E402
from maiplab.evaluation.modes import dead_reckon  # noqa: E402
from maiplab.sim.simulator import vehicle_corners  # noqa: E402
from maiplab.sim.world import LIGHT_GROUP  # noqa: E402


LIGHT_COLORS = {'G': 'tab:green', 'Y': 'gold', 'R': 'tab:red'}
LAYER_STYLE = {
    'lane': dict(facecolor='0.35', edgecolor='none'),
    'junction': dict(facecolor='0.45', edgecolor='none'),
    'crosswalk': dict(facecolor='white', edgecolor='0.2', hatch='//', linewidth=0.3),
    'sidewalk': dict(facecolor='0.8', edgecolor='none'),
    'infeasible': dict(facecolor='darkseagreen', edgecolor='none'),
}
SVG_RC = {'svg.hashsalt': 'maiplab', 'svg.fonttype': 'none'}


def _rect_patch(rect, gid, style):
    patch = Rectangle((rect.xmin, rect.ymin), rect.xmax - rect.xmin, rect.ymax - rect.ymin, **style)
    patch.set_gid(gid)
    return patch


def draw_map(ax, world):
    for rect_id, rect in enumerate(world.sidewalks):
        ax.add_patch(_rect_patch(rect, f'sidewalk-{rect_id}', LAYER_STYLE['sidewalk']))
    for rect_id, rect in enumerate(world.infeasible):
        ax.add_patch(_rect_patch(rect, f'infeasible-{rect_id}', LAYER_STYLE['infeasible']))
    for lane in world.lanes:
        ax.add_patch(_rect_patch(lane_rect(world, lane), f'lane-{lane.id}', LAYER_STYLE['lane']))
    if world.lanes:
        b = world.config.box_half
        junction = Rectangle((-b, -b), 2 * b, 2 * b, **LAYER_STYLE['junction'])
        junction.set_gid('junction')
        ax.add_patch(junction)
    for cw in world.crosswalks:
        ax.add_patch(_rect_patch(cw.rect, f'crosswalk-{cw.id}', LAYER_STYLE['crosswalk']))


def render_trajectories(world, frame, samples=None, out_path='scene.svg', dt=0.2, config=None, figsize=(6.0, 6.0)):
    """
    Draw the map, the entities of `frame` and every sampled future as an SVG.

    Each sample is dead-reckoned from the vehicle's current pose. SVG element
    ids are stable: `vehicle-<id>`, `ped-<id>`, `traj-<id>-<k>`, and the map
    layers `lane-<id>`, `junction`, `crosswalk-<id>`, `sidewalk-<k>`,
    `infeasible-<k>`, `light-<approach>`.

    Args:
        samples: dict vehicle id -> list of PredictionSample (may be None or empty)
    Returns:
        out_path
    """
    config = config or EncoderConfig()
    samples = samples or {}
    half = world.extent / 2.0
    with plt.rc_context(SVG_RC):
        fig, ax = plt.subplots(figsize=figsize)
        try:
            ax.set_xlim(-half, half)
            ax.set_ylim(-half, half)
            ax.set_aspect('equal')
            ax.set_axis_off()
            draw_map(ax, world)

            lights = frame.lights if frame is not None else None
            for approach, (x, y) in sorted(world.lights.items()):
                color = LIGHT_COLORS[lights[LIGHT_GROUP[approach]]] if lights is not None else '0.5'
                marker = Circle((x, y), 0.8, facecolor=color, edgecolor='black', linewidth=0.3)
                marker.set_gid(f'light-{approach}')
                ax.add_patch(marker)

            vehicles = frame.vehicles if frame is not None else ()
            peds = frame.peds if frame is not None else ()
            for vehicle in vehicles:
                box = Polygon(vehicle_corners(vehicle.x, vehicle.y, vehicle.theta, config.vehicle_length,
                                          config.vehicle_width), closed=True, facecolor='white', edgecolor='black',
                              linewidth=0.5, zorder=3)
                box.set_gid(f'vehicle-{vehicle.id}')
                ax.add_patch(box)
            for ped in peds:
                dot = Circle((ped.x, ped.y), config.ped_diameter / 2.0, facecolor='gold', edgecolor='black',
                             linewidth=0.3, zorder=3)
                dot.set_gid(f'ped-{ped.id}')
                ax.add_patch(dot)

            for vid in sorted(samples):
                vehicle = frame.vehicle(vid)
                for k, sample in enumerate(samples[vid]):
                    line = dead_reckon(vehicle.x, vehicle.y, sample.v, sample.theta, dt)
                    artist, = ax.plot(line[:, 0], line[:, 1], color='red', linewidth=0.6, alpha=0.7, zorder=4)
                    artist.set_gid(f'traj-{vid}-{k}')

            dirname = os.path.dirname(out_path)
            if dirname:
                os.makedirs(dirname, exist_ok=True)
            fig.savefig(out_path, format='svg', metadata={'Date': None})
        finally:
            plt.close(fig)
    return out_path
