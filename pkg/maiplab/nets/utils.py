# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import json
import os

import numpy as np

from maiplab.errors import ConfigurationError


CHECKPOINT_FORMAT_VERSION = 1
HEADER_KEY = '__header__'


def save_checkpoint(path, state_dict, header):
    """
    Write parameters and a JSON header to an `.npz` container.

    Args:
        path: output file; the `.npz` suffix is added by numpy when missing
        state_dict: mapping parameter name -> array
        header: JSON-serializable dict (format_version is filled in)
    """
    header = dict(header)
    header['format_version'] = CHECKPOINT_FORMAT_VERSION
    arrays = {name: np.asarray(value, dtype=np.float64) for name, value in state_dict.items()}
    if HEADER_KEY in arrays:
        raise ConfigurationError(f"parameter name {HEADER_KEY!r} is reserved")
    arrays[HEADER_KEY] = np.array(json.dumps(header, sort_keys=True))
    dirname = os.path.dirname(path)
    if dirname:
        os.makedirs(dirname, exist_ok=True)
    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    return path


def read_checkpoint_header(path):
    with np.load(path, allow_pickle=False) as data:
        if HEADER_KEY not in data.files:
            raise ConfigurationError(f"{path} is not a maiplab checkpoint (no header)")
        header = json.loads(str(data[HEADER_KEY]))
    if header.get('format_version') != CHECKPOINT_FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported checkpoint format version {header.get('format_version')}")
    return header


def load_checkpoint(path, variant=None):
    """
    Returns:
        (state_dict, header)
    """
    header = read_checkpoint_header(path)
    if variant is not None and header.get('variant') != variant:
        raise ConfigurationError(f"{path} holds a {header.get('variant')!r} model, expected {variant!r}")
    with np.load(path, allow_pickle=False) as data:
        state_dict = {name: data[name].copy() for name in data.files if name != HEADER_KEY}
    return state_dict, header
