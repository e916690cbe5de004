# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from .module import Module, Parameter
from .layers import Linear, Conv2d, ConvEncoder, LSTMCell, LSTM
from .maip import MAIPNet, NetConfig, Group1Features, Ensemble, reparameterize, maip_net, cnn_cvae_net, cnn_lstm_net
from .utils import save_checkpoint, load_checkpoint, read_checkpoint_header
