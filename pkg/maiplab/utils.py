# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import os
import logging

import numpy as np
import ruamel.yaml as yaml

from maiplab.errors import ConfigurationError


def wrap_degrees(angle):
    """
    wrap angles (degrees, scalar or array) to [-180, 180)
    """
    return np.mod(np.asarray(angle, dtype=np.float64) + 180.0, 360.0) - 180.0


def over_write_args_from_dict(args, dict):
    """
    overwrite arguments acocrding to a dict
    """
    for k in dict:
        setattr(args, k.replace('-', '_'), dict[k])


def none_if_none(value):
    # generated configs write str(None)
    return None if value == 'None' else value


def load_config_file(path):
    """
    load a config file into a dict.

    `.yaml` / `.yml` files are parsed with ruamel.yaml, anything else is read as
    `key = value` lines where `#` starts a comment and each value is a yaml scalar.
    """
    if not path:
        return {}
    with open(path, 'r', encoding='utf-8') as f:
        text = f.read()
    loader = yaml.YAML(typ='safe', pure=True)
    if os.path.splitext(path)[1] in ('.yaml', '.yml'):
        cfg = loader.load(text) or {}
        if not isinstance(cfg, dict):
            raise ConfigurationError(f"config file {path} must hold a mapping")
        return {str(k).replace('-', '_'): none_if_none(v) for k, v in cfg.items()}

    cfg = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected `key = value`, got {line!r}")
        key, value = (s.strip() for s in line.split('=', 1))
        cfg[key.replace('-', '_')] = none_if_none(loader.load(value)) if value else None
    return cfg


def over_write_args_from_file(args, path):
    """
    overwrite arguments acocrding to config file
    """
    over_write_args_from_dict(args, load_config_file(path))


def get_logger(name, save_path=None, level='INFO'):
    """
    create logger function
    """
    logger = logging.getLogger(name)
    logging.basicConfig(format='[%(asctime)s %(levelname)s] %(message)s', level=getattr(logging, level))

    if save_path is not None:
        os.makedirs(save_path, exist_ok=True)
        log_format = logging.Formatter('[%(asctime)s %(levelname)s] %(message)s')
        log_file = os.path.abspath(os.path.join(save_path, 'log.txt'))
        if not any(getattr(h, 'baseFilename', None) == log_file for h in logger.handlers):
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(log_format)
            logger.addHandler(file_handler)

    return logger


def count_parameters(model):
    return sum(p.size for p in model.parameters() if p.requires_grad)


class TBLog:
    """
    Construct tensorboard writer (self.writer).
    The tensorboard is saved at os.path.join(tb_dir, file_name).
    """

    def __init__(self, tb_dir, file_name, use_tensorboard=False):
        self.tb_dir = tb_dir
        self.use_tensorboard = use_tensorboard
        if self.use_tensorboard:
            from torch.utils.tensorboard import SummaryWriter
            self.writer = SummaryWriter(os.path.join(self.tb_dir, file_name))

    def update(self, tb_dict, it, suffix=None):
        """
        Args
            tb_dict: contains scalar values for updating tensorboard
            it: contains information of iteration (int).
            suffix: If not None, the update key has the suffix.
        """
        if suffix is None:
            suffix = ''
        if self.use_tensorboard:
            for key, value in tb_dict.items():
                self.writer.add_scalar(suffix + key, value, it)


def get_optimizer(net, optim_name='adam', lr=3e-3, momentum=0.9, weight_decay=0, nesterov=True, bias_wd_skip=True):
    '''
    return an optimizer over the trainable parameters of `net`.
    If bias_wd_skip, the optimizer does not apply weight decay on biases.
    '''
    from maiplab.autodiff.optim import SGD, Adam

    decay = []
    no_decay = []
    for name, param in net.named_parameters():
        if 'bias' in name and bias_wd_skip:
            no_decay.append((name, param))
        else:
            decay.append((name, param))

    per_param_args = [{'params': decay},
                      {'params': no_decay, 'weight_decay': 0.0}]

    optim_name = optim_name.lower()
    if optim_name == 'sgd':
        optimizer = SGD(per_param_args, lr=lr, momentum=momentum, weight_decay=weight_decay, nesterov=nesterov)
    elif optim_name == 'adam':
        optimizer = Adam(per_param_args, lr=lr, weight_decay=weight_decay)
    else:
        raise ConfigurationError(f"unknown optimizer {optim_name!r}")
    return optimizer


def get_cosine_schedule_with_warmup(optimizer, num_training_steps, num_cycles=7. / 16., num_warmup_steps=0,
                                    last_epoch=-1):
    '''
    Get cosine scheduler (LambdaLR).
    if warmup is needed, set num_warmup_steps (int) > 0.
    '''
    from maiplab.autodiff.optim import get_cosine_schedule_with_warmup as _cosine
    return _cosine(optimizer, num_training_steps, num_cycles, num_warmup_steps, last_epoch)


def get_dataset(args, logger=None):
    """
    create the held-out train / eval datasets

    Episodes come from the JSONL file `args.data` when given, otherwise
    `args.episodes` episodes are generated in memory from `args.seed`.

    Returns
        dict with 'train' / 'eval' IntersectionDataset, the shared 'encoder',
        the 'world' and the episode lists 'train_episodes' / 'eval_episodes'
    """
    from maiplab.datasets import GridEncoder, IntersectionDataset, split_episodes
    from maiplab.sim import build_world, generate_dataset, load_dataset, load_world

    print_fn = print if logger is None else logger.info
    data = getattr(args, 'data', None)
    if data:
        episodes = load_dataset(data)
        world = load_world(data)
        print_fn(f"loaded {len(episodes)} episodes from {data}")
    else:
        world = build_world()
        episodes = generate_dataset(args.episodes, args.seed, n_frames=getattr(args, 'n_frames', None),
                                    print_fn=print_fn)
    train_eps, eval_eps = split_episodes(episodes, args.test_ratio, args.split_seed)
    encoder = GridEncoder(world, args.grid_resolution, use_mask=args.use_mask)
    dataset_dict = {
        'train': IntersectionDataset(train_eps, encoder, args.th, args.tp),
        'eval': IntersectionDataset(eval_eps, encoder, args.th, args.tp),
        'encoder': encoder,
        'world': world,
        'train_episodes': train_eps,
        'eval_episodes': eval_eps,
    }
    print_fn(f"train samples: {len(dataset_dict['train'])} from {len(train_eps)} episodes, "
             f"eval samples: {len(dataset_dict['eval'])} from {len(eval_eps)} episodes")
    return dataset_dict
