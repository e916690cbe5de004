# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .cnn_cvae import CNNCVAE
