# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import json
import logging
import os
from typing import Dict, Iterator, List

import numpy as np

from maiplab.errors import ConfigurationError
from maiplab.sim.simulator import SCENARIO_CASES, Episode, Frame, IntersectionSimulator, SimConfig
from maiplab.sim.world import WorldConfig, build_world


logger = logging.getLogger(__name__)

FREE_CASE = 'free'
DEFAULT_MIX = {case: 1.0 / 3.0 for case in SCENARIO_CASES}


def normalize_mix(scenario_mix):
    """
    Accepts a mapping case -> weight or a sequence of weights in the order of
    SCENARIO_CASES; returns a normalized dict.
    """
    if scenario_mix is None:
        scenario_mix = DEFAULT_MIX
    if not isinstance(scenario_mix, dict):
        weights = list(scenario_mix)
        if len(weights) != len(SCENARIO_CASES):
            raise ConfigurationError(f"scenario mix needs {len(SCENARIO_CASES)} weights, got {len(weights)}")
        scenario_mix = dict(zip(SCENARIO_CASES, weights))
    unknown = set(scenario_mix) - set(SCENARIO_CASES) - {FREE_CASE}
    if unknown:
        raise ConfigurationError(f"unknown scenario cases {sorted(unknown)}")
    total = float(sum(scenario_mix.values()))
    if total <= 0 or any(w < 0 for w in scenario_mix.values()):
        raise ConfigurationError("scenario weights must be non-negative with a positive sum")
    return {case: float(w) / total for case, w in scenario_mix.items()}


def allocate_cases(n_episodes, scenario_mix, rng):
    """largest-remainder allocation of episode counts, then a seeded shuffle"""
    mix = normalize_mix(scenario_mix)
    cases = sorted(mix)
    quotas = np.array([mix[c] * n_episodes for c in cases])
    counts = np.floor(quotas).astype(int)
    remainder = n_episodes - counts.sum()
    order = np.argsort(-(quotas - counts), kind='stable')
    counts[order[:remainder]] += 1
    labels = [c for c, k in zip(cases, counts) for _ in range(k)]
    rng.shuffle(labels)
    return labels


def generate_episode(world, case=None, seed=None, ep=0, config=None, n_frames=None):
    """run one seeded episode; `seed` may be an int or a SeedSequence"""
    config = config or SimConfig()
    rng = np.random.default_rng(seed)
    sim = IntersectionSimulator(world, config, rng, ep=ep, case=None if case == FREE_CASE else case)
    frames = sim.run(n_frames)
    metadata = {'ep': ep, 'case': case or FREE_CASE, 'n_frames': len(frames), 'collisions': sim.collisions,
                'overlaps': [list(o) for o in sim.overlaps], 'n_vehicles': sim.next_vehicle_id,
                'n_peds': sim.next_ped_id}
    if isinstance(seed, np.random.SeedSequence):
        metadata['seed'] = {'entropy': seed.entropy, 'spawn_key': list(seed.spawn_key)}
    else:
        metadata['seed'] = seed
    if sim.collisions:
        logger.warning("episode %d (%s) recorded %d overlaps", ep, case, sim.collisions)
    return Episode(frames, seed=seed if isinstance(seed, int) else None, metadata=metadata)


def frame_to_line(frame):
    return json.dumps(frame.to_record(), separators=(',', ':'))


def code_tables():
    from maiplab.datasets.encoder import STATIC_CODES, DYNAMIC_CODES
    return {'static': dict(STATIC_CODES), 'dynamic': dict(DYNAMIC_CODES)}


def sidecar_path(out_path):
    return f"{out_path}.meta.json"


def generate_dataset(n_episodes, seed, scenario_mix=None, out_path=None, sim_config=None, world_config=None,
                     n_frames=None, print_fn=None):
    """
    Generate `n_episodes` seeded episodes and write them as JSON Lines.

    Every episode gets its own generator spawned from SeedSequence(seed), so
    the output is fully determined by (seed, configs) and episodes can be
    produced independently.

    Returns:
        list of Episode
    """
    print_fn = print_fn or logger.info
    if n_episodes < 1:
        raise ConfigurationError(f"n_episodes must be >= 1, got {n_episodes}")
    sim_config = sim_config or SimConfig()
    world = build_world(world_config or WorldConfig())
    children = np.random.SeedSequence(seed).spawn(n_episodes + 1)
    cases = allocate_cases(n_episodes, scenario_mix, np.random.default_rng(children[0]))

    episodes = []
    for ep, (case, child) in enumerate(zip(cases, children[1:])):
        episodes.append(generate_episode(world, case, child, ep, sim_config, n_frames))

    counts = {c: cases.count(c) for c in sorted(set(cases))}
    n_total = sum(len(e) for e in episodes)
    print_fn(f"generated {n_episodes} episodes / {n_total} frames, cases {counts}")

    if out_path is not None:
        write_dataset(episodes, out_path, world, sim_config, seed)
        print_fn(f"dataset written to {out_path}")
    return episodes


def write_dataset(episodes, out_path, world, sim_config, seed=None):
    dirname = os.path.dirname(out_path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(out_path, 'w', encoding='utf-8', newline='\n') as f:
        for episode in episodes:
            for frame in episode.frames:
                f.write(frame_to_line(frame))
                f.write('\n')
    meta = {
        'seed': seed,
        'dt': sim_config.dt,
        'world': world.config.to_dict(),
        'sim': sim_config.to_dict(),
        'episodes': [e.metadata for e in episodes],
        'codes': code_tables(),
    }
    with open(sidecar_path(out_path), 'w', encoding='utf-8', newline='\n') as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write('\n')


def read_frames(path) -> Iterator[Frame]:
    with open(path, encoding='utf-8') as f:
        for line in f:
            line = line.strip()
            if line:
                yield Frame.from_record(json.loads(line))


def read_metadata(path) -> Dict:
    meta_path = sidecar_path(path)
    if not os.path.exists(meta_path):
        return {}
    with open(meta_path, encoding='utf-8') as f:
        return json.load(f)


def load_dataset(path) -> List[Episode]:
    """group the frames of a JSONL dataset back into episodes (metadata from the sidecar when present)"""
    meta = read_metadata(path)
    by_ep: Dict[int, List[Frame]] = {}
    for frame in read_frames(path):
        by_ep.setdefault(frame.ep, []).append(frame)
    ep_meta = {m['ep']: m for m in meta.get('episodes', [])}
    episodes = []
    for ep in sorted(by_ep):
        frames = sorted(by_ep[ep], key=lambda fr: fr.t)
        m = ep_meta.get(ep, {'ep': ep})
        episodes.append(Episode(frames, seed=m.get('seed') if isinstance(m.get('seed'), int) else None, metadata=m))
    return episodes


def load_world(path):
    """rebuild the world a dataset was generated on"""
    meta = read_metadata(path)
    return build_world(WorldConfig.from_dict(meta['world']) if 'world' in meta else None)
