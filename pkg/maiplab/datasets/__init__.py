# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .encoder import (STATIC_CODES, DYNAMIC_CODES, LIGHT_CODES, LIGHT_ONE_HOT, CODE_TABLE_VERSION, EncoderConfig,
                      encode_static, decode_static, rasterize_layers, encode_dynamic, extract_vehicle_map,
                      vehicle_state_vector, box_footprint, disc_footprint, cell_index)
from .mask import MaskConfig, build_mask, apply_mask
from .samples import TrainingSample, GridEncoder, IntersectionDataset, make_training_samples, scene_histories
from .sampler import RandomSampler, collate, get_data_loader
from .utils import split_episodes
