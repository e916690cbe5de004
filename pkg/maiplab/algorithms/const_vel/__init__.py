# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .const_vel import ConstVel
