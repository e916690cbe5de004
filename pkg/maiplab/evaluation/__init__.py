# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .metrics import MetricRow, MetricTable, rmse_per_draw, rmse_table, average_tables
from .modes import Modes, dead_reckon, cluster_modes
