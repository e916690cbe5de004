# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Command-line entry point: `maiplab <command> [flags]`.

Commands: simulate, train, eval, sample, render, gradcheck. Run arguments are
resolved as parser defaults < `--config` file < explicit flags.
"""

import argparse
import os
import sys

import numpy as np

from maiplab.algorithms import name2alg, get_algorithm, load_algorithm
from maiplab.errors import ConfigurationError, MaipError
from maiplab.lighting.config import get_parser
from maiplab.utils import get_dataset, get_logger, load_config_file, over_write_args_from_dict, TBLog

logger = get_logger('maiplab')

# config / flag names that map onto run arguments under another name
ALIASES = {'method': 'algorithm', 'epochs': 'epoch', 'model': 'load_path'}

# command-specific run arguments absent from the run parser
COMMAND_DEFAULTS = {
    'eval': {'baselines': []},
    'render': {'episode': 0, 't': None},
    'gradcheck': {'delta': 1e-4, 'rtol': 1e-3, 'max_entries': 16},
}


def build_args(ns):
    """
    run arguments of a parsed command line: defaults, then the config file, then explicit flags
    """
    args = get_parser().parse_args("")
    args.out = None
    over_write_args_from_dict(args, COMMAND_DEFAULTS.get(ns.command, {}))
    cfg = load_config_file(getattr(ns, 'config', None))
    over_write_args_from_dict(args, {ALIASES.get(k, k): v for k, v in cfg.items()})
    explicit = {ALIASES.get(k, k): v for k, v in vars(ns).items() if k not in ('command', 'config')}
    over_write_args_from_dict(args, explicit)

    if args.algorithm not in name2alg:
        raise ConfigurationError(f"unknown method {args.algorithm!r}, choose from {', '.join(name2alg)}")
    for argument in name2alg[args.algorithm].get_argument():
        key = argument.name.lstrip('-').replace('-', '_')
        if key not in cfg and key not in explicit:
            setattr(args, key, argument.default)
    if args.save_name is None:
        args.save_name = f'{args.algorithm}_{args.seed}'
    return args


def resolve_algorithm(args, tb_log=None):
    """the checkpointed method when --model is given (its run shape replaces the one in args), else a fresh one"""
    if args.load_path:
        return load_algorithm(args.load_path, args, tb_log=tb_log, logger=logger)
    return get_algorithm(args, tb_log=tb_log, logger=logger)


def require_model(args, parser, action):
    if name2alg[args.algorithm].learned and not args.load_path:
        parser.error(f"{action} the learned method {args.algorithm} needs --model")


def cmd_simulate(args):
    from maiplab.sim import generate_dataset

    generate_dataset(args.episodes, args.seed, out_path=args.out, n_frames=args.n_frames, print_fn=logger.info)
    return 0


def cmd_train(args):
    from maiplab.lighting import Trainer

    if not name2alg[args.algorithm].learned:
        logger.info(f"{args.algorithm} is rule based, nothing to train")
        return 0
    save_path = os.path.join(args.save_dir, args.save_name)
    tb_log = TBLog(save_path, 'tensorboard', use_tensorboard=args.use_tensorboard)
    algorithm = resolve_algorithm(args, tb_log)
    dataset_dict = get_dataset(args, logger)
    trainer = Trainer(args, algorithm)
    trainer.fit(dataset_dict['train'], dataset_dict['eval'])
    if args.out:
        out_dir, out_name = os.path.split(args.out)
        algorithm.save_model(out_name, out_dir or '.')
    return 0


def cmd_eval(args):
    from maiplab.lighting import Trainer

    algorithm = resolve_algorithm(args)
    dataset_dict = get_dataset(args, logger)
    table = Trainer(args, algorithm).evaluate(dataset_dict['eval'], args.n_samples, args.seed)
    for name in args.baselines:
        base_args = argparse.Namespace(**vars(args))
        base_args.algorithm, base_args.load_path = name, None
        base_args.save_name = f'{name}_{args.seed}'
        table.extend(Trainer(base_args, get_algorithm(base_args, logger=logger))
                     .evaluate(dataset_dict['eval'], args.n_samples, args.seed))
    if args.out:
        table.to_csv(args.out)
        logger.info(f"metric table written to {args.out}")
    else:
        sys.stdout.write(table.to_csv())
    return 0


def cmd_sample(args):
    from maiplab.algorithms import PredictionSample
    from maiplab.evaluation import cluster_modes
    from maiplab.lighting import Trainer

    algorithm = resolve_algorithm(args)
    dataset_dict = get_dataset(args, logger)
    pred, y, keys = Trainer(args, algorithm).predict(dataset_dict['eval'], args.n_samples, args.seed)
    modes = np.array([cluster_modes([PredictionSample.from_array(p) for p in row]).count for row in pred])
    out = args.out or f'{args.algorithm}_samples.npz'
    np.savez(out, pred=pred, y=y, keys=np.asarray(keys, dtype=np.int64), modes=modes,
             method=np.array(args.algorithm))
    logger.info(f"{pred.shape[1]} draws of {pred.shape[0]} samples written to {out}, "
                f"mean mode count {modes.mean():.2f}")
    return 0


def cmd_render(args):
    from maiplab.datasets import GridEncoder
    from maiplab.evaluation.render import render_trajectories
    from maiplab.sim import build_world, generate_dataset, load_dataset, load_world

    if args.data:
        episodes, world = load_dataset(args.data), load_world(args.data)
    else:
        episodes = generate_dataset(args.episodes, args.seed, n_frames=args.n_frames, print_fn=logger.info)
        world = build_world()
    if not 0 <= args.episode < len(episodes):
        raise ConfigurationError(f"episode {args.episode} out of range, the dataset has {len(episodes)}")
    frames = episodes[args.episode].frames
    t = len(frames) - 1 if args.t is None else args.t
    if not 0 <= t < len(frames):
        raise ConfigurationError(f"frame {t} out of range, episode {args.episode} has {len(frames)}")

    samples = None
    if args.load_path or not name2alg[args.algorithm].learned:
        algorithm = resolve_algorithm(args)
        if t + 1 < algorithm.th:
            raise ConfigurationError(f"frame {t} has fewer than {algorithm.th} history frames")
        encoder = GridEncoder(world, algorithm.grid_resolution, use_mask=algorithm.use_mask)
        samples = algorithm.predict_scene(frames[:t + 1], encoder, args.n_samples, args.seed)
    out = render_trajectories(world, frames[t], samples, args.out or 'scene.svg')
    logger.info(f"scene written to {out}")
    return 0


def cmd_gradcheck(args):
    from maiplab.datasets import GridEncoder, make_training_samples
    from maiplab.sim import build_world, generate_dataset

    if not hasattr(name2alg[args.algorithm], 'gradient_check'):
        raise ConfigurationError(f"gradcheck covers the CVAE methods, not {args.algorithm}")
    algorithm = resolve_algorithm(args)
    episodes = generate_dataset(1, args.seed, n_frames=algorithm.th + algorithm.tp + 1, print_fn=logger.info)
    encoder = GridEncoder(build_world(), algorithm.grid_resolution, use_mask=algorithm.use_mask)
    samples = make_training_samples(episodes[0], algorithm.th, algorithm.tp, encoder)
    if not samples:
        raise ConfigurationError("the generated episode holds no complete sample window")
    report = algorithm.gradient_check(samples[:1], delta=args.delta, rtol=args.rtol,
                                      max_entries=args.max_entries or None)
    sys.stdout.write(report.format() + '\n')
    return 0 if report.passed else 1


def add_common(p, *names):
    """explicit flags default to SUPPRESS so config-file values are not overwritten"""
    flags = {
        'seed': (['--seed'], dict(type=int)),
        'config': (['--config'], dict(type=str, help='yaml or `key = value` config file')),
        'episodes': (['--episodes'], dict(type=int)),
        'n_frames': (['--n-frames', '--n_frames'], dict(type=int, dest='n_frames')),
        'data': (['--data'], dict(type=str, help='JSONL dataset')),
        'model': (['--model'], dict(type=str, help='checkpoint (.npz)')),
        'method': (['--method'], dict(type=str, choices=list(name2alg))),
        'beta': (['--beta'], dict(type=float)),
        'epochs': (['--epochs'], dict(type=int)),
        'n_samples': (['--n-samples', '--n_samples'], dict(type=int, dest='n_samples')),
        'out': (['--out'], dict(type=str)),
        'grid_resolution': (['--grid-resolution', '--grid_resolution'], dict(type=float, dest='grid_resolution')),
    }
    for name in names:
        options, kwargs = flags[name]
        p.add_argument(*options, default=argparse.SUPPRESS, **kwargs)


def get_cli_parser():
    parser = argparse.ArgumentParser(prog='maiplab', description='multi-agent interactive trajectory prediction')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('simulate', help='generate a JSONL dataset')
    add_common(p, 'seed', 'config', 'episodes', 'n_frames')
    p.add_argument('--out', type=str, required=True)

    p = sub.add_parser('train', help='train a method and write its checkpoint')
    add_common(p, 'seed', 'config', 'episodes', 'n_frames', 'data', 'model', 'method', 'beta', 'epochs', 'out',
               'grid_resolution')

    p = sub.add_parser('eval', help='RMSE table (CSV) of a method on the held-out split')
    add_common(p, 'seed', 'config', 'episodes', 'n_frames', 'data', 'model', 'method', 'n_samples', 'out',
               'grid_resolution')
    p.add_argument('--baselines', nargs='*', choices=[k for k, v in name2alg.items() if not v.learned],
                   default=argparse.SUPPRESS, help='rule-based methods appended to the table')

    p = sub.add_parser('sample', help='dump sampled futures of the held-out split')
    add_common(p, 'seed', 'config', 'episodes', 'n_frames', 'data', 'model', 'method', 'n_samples', 'out',
               'grid_resolution')

    p = sub.add_parser('render', help='draw one scene with sampled futures (SVG)')
    add_common(p, 'seed', 'config', 'episodes', 'n_frames', 'data', 'model', 'method', 'n_samples', 'out',
               'grid_resolution')
    p.add_argument('--episode', type=int, default=argparse.SUPPRESS)
    p.add_argument('--t', type=int, default=argparse.SUPPRESS, help='frame index (defaults to the last)')

    p = sub.add_parser('gradcheck', help='finite-difference check of a freshly initialized model')
    add_common(p, 'seed', 'config', 'method', 'grid_resolution')
    p.add_argument('--delta', type=float, default=argparse.SUPPRESS)
    p.add_argument('--rtol', type=float, default=argparse.SUPPRESS)
    p.add_argument('--max-entries', '--max_entries', dest='max_entries', type=int, default=argparse.SUPPRESS,
                   help='randomly chosen entries checked per parameter tensor (defaults to 16, 0 for all)')
    return parser


def main(argv=None):
    parser = get_cli_parser()
    ns = parser.parse_args(argv)
    try:
        args = build_args(ns)
        if ns.command == 'simulate':
            return cmd_simulate(args)
        if ns.command == 'train':
            return cmd_train(args)
        if ns.command == 'eval':
            require_model(args, parser, 'evaluating')
            return cmd_eval(args)
        if ns.command == 'sample':
            require_model(args, parser, 'sampling')
            return cmd_sample(args)
        if ns.command == 'render':
            return cmd_render(args)
        return cmd_gradcheck(args)
    except (MaipError, OSError, KeyError) as e:
        logger.error(f"{ns.command} failed: {e}")
        return 1


if __name__ == '__main__':
    sys.exit(main())
