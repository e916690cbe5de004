# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .config import get_config, get_parser
from .trainer import Trainer
