# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from maiplab.algorithms.maip import MAIP
from maiplab.nets import cnn_cvae_net


class CNNCVAE(MAIP):
    """
        MAIP with the X4 LSTM replaced by a fully connected layer over the
        flattened Th-step state history. Training and prediction are MAIP's.
    """
    variant = 'cnn_cvae'
    default_net_builder = staticmethod(cnn_cvae_net)
