# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from functools import partial

import numpy as np
import torch
from torch.utils.data import DataLoader
from torch.utils.data.sampler import Sampler

from maiplab.datasets.encoder import DYNAMIC_CODES, STATIC_CODES, code_scale


STATIC_SCALE = code_scale(STATIC_CODES)
DYNAMIC_SCALE = code_scale(DYNAMIC_CODES)


class RandomSampler(Sampler):
    """
    Seeded epoch sampler: epoch k yields a permutation drawn from a generator
    seeded by (seed, k), so shuffles do not depend on how many epochs ran before.
    """

    def __init__(self, num_samples, seed=0, shuffle=True):
        super().__init__()
        self.num_samples = num_samples
        self.seed = seed
        self.shuffle = shuffle
        self.epoch = 0

    def set_epoch(self, epoch):
        self.epoch = epoch

    def __iter__(self):
        if not self.shuffle:
            return iter(range(self.num_samples))
        # deterministically shuffle based on seed and epoch
        g = torch.Generator()
        g.manual_seed(int(np.random.SeedSequence([self.seed, self.epoch]).generate_state(1)[0]))
        return iter(torch.randperm(self.num_samples, generator=g).tolist())

    def __len__(self):
        return self.num_samples


def collate(samples, map_history='last'):
    """
    Stack samples into network inputs. Grids become real maps scaled to [0, 1]
    by the largest code; X1 is shared so only one copy is kept.

    Returns:
        dict with x1 [1, 1, R, R], x2/x3 [B, C, R, R] (C = 1 for 'last', Th for
        'stacked'), x4 [B, Th, 8], y [B, Tp, 2] (when labelled) and the sample keys
    """
    if not samples:
        raise ValueError("cannot collate an empty batch")
    if map_history == 'last':
        pick = lambda m: m[-1:]
    elif map_history == 'stacked':
        pick = lambda m: m
    else:
        raise ValueError(f"map_history must be 'last' or 'stacked', got {map_history!r}")
    batch = {
        'x1': np.asarray(samples[0].x1, dtype=np.float64)[None, None] / STATIC_SCALE,
        'x2': np.stack([pick(s.x2) for s in samples]).astype(np.float64) / DYNAMIC_SCALE,
        'x3': np.stack([pick(s.x3) for s in samples]).astype(np.float64) / DYNAMIC_SCALE,
        'x4': np.stack([s.x4 for s in samples]).astype(np.float64),
        'vehicle_id': [s.vehicle_id for s in samples],
        'ep': [s.ep for s in samples],
        't': [s.t for s in samples],
        # latent draws of row b come from default_rng([seed, *rng_keys[b]])
        'rng_keys': [(s.ep, s.t, s.vehicle_id) for s in samples],
        'samples': list(samples),
    }
    if all(s.y is not None for s in samples):
        batch['y'] = np.stack([s.y for s in samples]).astype(np.float64)
    return batch


def get_data_loader(dataset, batch_size=32, shuffle=True, seed=0, drop_last=False, map_history='last',
                    num_workers=0):
    """
    get_data_loader returns a torch DataLoader over `dataset` yielding numpy
    batches from `collate`; shuffling is reproducible from `seed`, call
    `loader.sampler.set_epoch(k)` per epoch.
    """
    sampler = RandomSampler(len(dataset), seed=seed, shuffle=shuffle)
    return DataLoader(dataset, batch_size=batch_size, sampler=sampler, drop_last=drop_last,
                      collate_fn=partial(collate, map_history=map_history), num_workers=num_workers)
