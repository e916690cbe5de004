# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from maiplab.errors import ConfigurationError
from maiplab.nets import read_checkpoint_header

from .algorithmbase import AlgorithmBase
from .maip import MAIP
from .cnn_cvae import CNNCVAE
from .cnn_lstm import CNNLSTM
from .maip_recursive import MAIPRecursive
from .idm import IDM
from .const_vel import ConstVel
from .baselines import BaselineVariant, idm_predict, const_vel_predict, baseline_predict
from .utils import PredictionSample, Argument, kl_divergence, wrapped_squared_error, cvae_loss

# if any new method, please append the dict
name2alg = {
    'maip': MAIP,
    'cnn_cvae': CNNCVAE,
    'cnn_lstm': CNNLSTM,
    'maip_recursive': MAIPRecursive,
    'idm': IDM,
    'const_vel': ConstVel,
}


def get_algorithm(args, net_builder=None, tb_log=None, logger=None):
    try:
        alg_cls = name2alg[args.algorithm]
    except KeyError:
        raise ConfigurationError(f"unknown method {args.algorithm!r}, choose from {', '.join(name2alg)}") from None
    return alg_cls(args=args, net_builder=net_builder, tb_log=tb_log, logger=logger)


def load_algorithm(load_path, args, tb_log=None, logger=None):
    """
    Build the method recorded in a checkpoint header, with the run shape
    (horizons, grid, latent size, map handling) taken from the header, and load
    its parameters.
    """
    header = read_checkpoint_header(load_path)
    args.algorithm = header['variant']
    for key in ('th', 'tp', 'latent_dim', 'grid_resolution', 'grid_size', 'map_history', 'use_mask'):
        if key in header:
            setattr(args, key, header[key])
    for argument in name2alg[args.algorithm].get_argument():
        key = argument.name.lstrip('-').replace('-', '_')
        if not hasattr(args, key):
            setattr(args, key, argument.default)
    if 'members' in header:
        args.ensemble_size = header['members']
    algorithm = get_algorithm(args, tb_log=tb_log, logger=logger)
    algorithm.load_model(load_path)
    return algorithm
