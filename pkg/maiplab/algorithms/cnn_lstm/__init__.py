# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .cnn_lstm import CNNLSTM
