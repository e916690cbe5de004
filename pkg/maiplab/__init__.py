# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .lighting import Trainer, get_config
from .utils import get_dataset
from .algorithms import get_algorithm, load_algorithm, PredictionSample, BaselineVariant, baseline_predict
from .datasets import get_data_loader, split_episodes, GridEncoder, IntersectionDataset, TrainingSample
from .sim import build_world, generate_dataset, load_dataset
from .evaluation import MetricTable, rmse_table, cluster_modes
from .errors import MaipError, ShapeError, UsageError, ConfigurationError, GeometryError, DivergenceError
