# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .idm import IDM
