# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import argparse

from maiplab.algorithms import name2alg
from maiplab.algorithms.utils import str2bool
from maiplab.errors import ConfigurationError
from maiplab.utils import over_write_args_from_dict


def get_parser(description='MAIP Lighting'):
    parser = argparse.ArgumentParser(description=description)

    '''
    Saving & loading of the model.
    '''
    parser.add_argument('--save_dir', type=str, default='./saved_models')
    parser.add_argument('-sn', '--save_name', type=str, default=None)
    parser.add_argument('--load_path', type=str, default=None)
    parser.add_argument('-o', '--overwrite', action='store_true')
    parser.add_argument('--use_tensorboard', action='store_true',
                        help='Use tensorboard to plot and save curves, otherwise only log them.')

    '''
    Training Configuration
    '''
    parser.add_argument('--epoch', '--epochs', dest='epoch', type=int, default=20)
    parser.add_argument('--num_train_iter', type=int, default=0,
                        help='total number of training iterations (0: epoch * batches per epoch)')
    parser.add_argument('--num_eval_iter', type=int, default=0,
                        help='evaluation frequency (0: once per epoch)')
    parser.add_argument('-bsz', '--batch_size', type=int, default=32)
    parser.add_argument('--eval_batch_size', type=int, default=256,
                        help='batch size of evaluation data loader (it does not affect the metrics)')
    parser.add_argument('--eval_samples', type=int, default=1,
                        help='draws per sample when scoring checkpoints during training')

    '''
    Optimizer configurations
    '''
    parser.add_argument('--optim', type=str, default='adam')
    parser.add_argument('--lr', type=float, default=3e-3)
    parser.add_argument('--momentum', type=float, default=0.9)
    parser.add_argument('--weight_decay', type=float, default=0.0)
    parser.add_argument('--lr_warm_up', type=float, default=0.03,
                        help='fraction of the iterations with a linear learning rate warm-up')

    '''
    Network Configurations
    '''
    parser.add_argument('--latent_dim', type=int, default=2)
    parser.add_argument('--th', type=int, default=5, help='history frames')
    parser.add_argument('--tp', type=int, default=5, help='predicted frames')
    parser.add_argument('--grid_resolution', type=float, default=2.0, help='grid cell side in meters')
    parser.add_argument('--map_history', type=str, default='last', choices=('last', 'stacked'),
                        help='feed the last dynamic map or all Th of them')
    parser.add_argument('--use_mask', type=str2bool, default=True,
                        help='crop the map around the target vehicle')

    '''
    Method Configurations
    '''
    parser.add_argument('-alg', '--algorithm', '--method', dest='algorithm', type=str, default='maip',
                        help='prediction method')
    parser.add_argument('--clip_grad', type=float, default=0)

    '''
    Data Configurations
    '''
    parser.add_argument('--data', type=str, default=None, help='JSONL dataset (generated in memory when absent)')
    parser.add_argument('--episodes', type=int, default=10)
    parser.add_argument('--n_frames', type=int, default=None)
    parser.add_argument('--test_ratio', type=float, default=0.2)
    parser.add_argument('--split_seed', type=int, default=0)

    '''
    Sampling
    '''
    parser.add_argument('--n_samples', '--n-samples', dest='n_samples', type=int, default=20)
    parser.add_argument('--seed', default=0, type=int, help='seed for data, initialization and sampling')
    return parser


def add_algorithm_arguments(parser, algorithm):
    if algorithm not in name2alg:
        raise ConfigurationError(f"unknown method {algorithm!r}, choose from {', '.join(name2alg)}")
    for argument in name2alg[algorithm].get_argument():
        parser.add_argument(argument.name, type=argument.type, default=argument.default, help=argument.help)
    return parser


def get_config(config):
    """
    argparse namespace of a run: parser defaults overwritten by the `config` dict
    """
    parser = get_parser()

    # add algorithm specific parameters
    args = parser.parse_args("")
    over_write_args_from_dict(args, config)
    add_algorithm_arguments(parser, args.algorithm)

    args = parser.parse_args("")
    over_write_args_from_dict(args, config)

    if args.save_name is None:
        args.save_name = f'{args.algorithm}_{args.seed}'
    return args
