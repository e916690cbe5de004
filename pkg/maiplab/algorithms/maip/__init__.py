# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .maip import MAIP
