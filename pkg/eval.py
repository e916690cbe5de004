# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Score a checkpoint (and optionally the rule-based baselines) on the held-out split:

    python eval.py --load_path saved_models/maip/maip_0/model_best.npz --data data/intersection_0.jsonl
"""

import argparse
import os

from maiplab.algorithms import get_algorithm, load_algorithm
from maiplab.lighting import Trainer
from maiplab.lighting.config import get_parser
from maiplab.utils import get_dataset, get_logger


if __name__ == "__main__":
    parser = get_parser(description='MAIP evaluation')
    parser.add_argument('--baselines', nargs='*', default=['idm', 'const_vel'])
    parser.add_argument('--out', type=str, default=None, help='metric CSV (defaults next to the checkpoint)')
    args = parser.parse_args()
    if args.load_path is None:
        parser.error('--load_path is required')

    save_dir = os.path.dirname(args.load_path) or '.'
    args.save_dir, args.save_name = os.path.split(save_dir)
    logger = get_logger(args.save_name or 'eval', save_dir, "INFO")

    algorithm = load_algorithm(args.load_path, args, logger=logger)
    dataset_dict = get_dataset(args, logger)
    eval_dset = dataset_dict['eval']

    table = Trainer(args, algorithm).evaluate(eval_dset, args.n_samples, args.seed)
    for name in args.baselines:
        base_args = argparse.Namespace(**vars(args))
        base_args.algorithm = name
        table.extend(Trainer(base_args, get_algorithm(base_args, logger=logger))
                     .evaluate(eval_dset, args.n_samples, args.seed))

    out = args.out or os.path.join(save_dir, 'metrics.csv')
    table.to_csv(out)
    logger.info(table.format_table())
    logger.info(f"metric table written to {out}")
