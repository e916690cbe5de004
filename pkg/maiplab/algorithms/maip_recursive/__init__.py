# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .maip_recursive import MAIPRecursive, advance_sample, recursive_rollout
