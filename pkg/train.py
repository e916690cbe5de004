# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Train one method from a generated experiment config:

    python train.py --c config/maip/maip/maip_0.yaml

Values in the config file overwrite the command line.
"""

import os
import shutil

from maiplab.algorithms import get_algorithm, load_algorithm
from maiplab.datasets import get_data_loader
from maiplab.lighting.config import add_algorithm_arguments, get_parser
from maiplab.utils import get_dataset, get_logger, count_parameters, over_write_args_from_file, TBLog


def main(args):
    '''
    main(args) trains the method named by args.algorithm and saves its checkpoints
    under save_dir/save_name.
    '''
    save_path = os.path.join(args.save_dir, args.save_name)
    if os.path.exists(save_path) and args.overwrite:
        shutil.rmtree(save_path)
    if os.path.exists(save_path) and not args.overwrite:
        raise Exception('already existing model: {}'.format(save_path))
    if args.load_path is not None and os.path.abspath(save_path) == os.path.abspath(os.path.dirname(args.load_path)):
        raise Exception('Saving & Loading pathes are same. Give another --save_name to fine-tune.')

    # SET save_path and logger
    tb_log = TBLog(save_path, 'tensorboard', use_tensorboard=args.use_tensorboard)
    logger = get_logger(args.save_name, save_path, "INFO")

    if args.load_path is not None:
        model = load_algorithm(args.load_path, args, tb_log, logger)
    else:
        model = get_algorithm(args, tb_log=tb_log, logger=logger)
    if not model.learned:
        logger.info(f"{args.algorithm} is rule based, nothing to train")
        return
    logger.info(f'Number of Trainable Params: {count_parameters(model.model)}')
    logger.info(f"Arguments: {args}")

    # Construct Dataset & DataLoader
    dataset_dict = get_dataset(args, logger)
    loader_dict = {}
    loader_dict['train'] = get_data_loader(dataset_dict['train'], args.batch_size, shuffle=True, seed=args.seed,
                                           map_history=args.map_history)
    loader_dict['eval'] = get_data_loader(dataset_dict['eval'], args.eval_batch_size, shuffle=False,
                                          map_history=args.map_history)
    model.set_data_loader(loader_dict)

    # SET Optimizer & LR Scheduler
    model.build_optimizer()

    # START TRAINING
    logger.info("Model training")
    result = model.train()
    logger.info(f"loss history: {result['loss_history']}")
    logger.info(f"best eval score {result['eval/best_score']:.4f} at {result['eval/best_it']} iters")

    model.save_model('latest_model.npz', save_path)


if __name__ == "__main__":
    parser = get_parser(description='MAIP training')
    # config file
    parser.add_argument('--c', type=str, default='')

    # add algorithm specific parameters
    args = parser.parse_args()
    over_write_args_from_file(args, args.c)
    add_algorithm_arguments(parser, args.algorithm)

    args = parser.parse_args()
    over_write_args_from_file(args, args.c)
    if args.save_name is None:
        args.save_name = f'{args.algorithm}_{args.seed}'

    main(args)
