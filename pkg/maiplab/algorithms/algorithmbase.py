# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import os
from inspect import signature

import numpy as np
from progress.bar import Bar

from maiplab.algorithms.utils import AverageMeter, PredictionSample
from maiplab.autodiff import clip_grad_norm
from maiplab.datasets.encoder import grid_size
from maiplab.datasets.samples import scene_histories
from maiplab.datasets.sampler import collate
from maiplab.errors import ConfigurationError, DivergenceError
from maiplab.evaluation.metrics import rmse_per_draw
from maiplab.nets import Ensemble, load_checkpoint, save_checkpoint
from maiplab.sim.world import WorldConfig
from maiplab.utils import get_cosine_schedule_with_warmup, get_optimizer


class AlgorithmBase:
    """
        Base class for prediction methods
        init method specific parameters and common parameters

        Args:
            - args (`argparse`):
                method arguments
            - net_builder (`callable`):
                network building function; the method's own builder when None
            - tb_log (`TBLog`):
                tensorboard logger
            - logger (`logging.Logger`):
                logger to use
    """
    # checkpoint tag
    variant = None
    # False for rule-based predictors that need no training artifacts
    learned = True
    # True when every draw of a prediction is identical
    deterministic = False
    default_net_builder = None

    def __init__(
        self,
        args,
        net_builder=None,
        tb_log=None,
        logger=None,
        **kwargs):

        # common arguments
        self.args = args
        self.algorithm = args.algorithm
        self.seed = args.seed
        self.epochs = args.epoch
        self.batch_size = args.batch_size
        self.clip_grad = args.clip_grad
        self.save_name = args.save_name
        self.save_dir = args.save_dir
        self.th = args.th
        self.tp = args.tp
        self.latent_dim = args.latent_dim
        self.grid_resolution = args.grid_resolution
        self.grid_size = getattr(args, 'grid_size', None) or grid_size(WorldConfig().extent, args.grid_resolution)
        self.map_history = args.map_history
        self.use_mask = args.use_mask
        self.num_train_iter = getattr(args, 'num_train_iter', 0) or 0
        self.num_eval_iter = getattr(args, 'num_eval_iter', 0) or 0
        self.eval_samples = getattr(args, 'eval_samples', 1) or 1

        # common utils arguments
        self.tb_log = tb_log
        self.logger = logger
        self.print_fn = print if logger is None else logger.info

        # common model related parameters
        self.it = 0
        self.epoch = 0
        self.best_eval_score, self.best_it = float('inf'), 0
        self.optimizer = None
        self.scheduler = None
        self.loader_dict = {}
        self.loss_history = []
        self.rng = np.random.default_rng(self.seed)

        self.net_builder = net_builder or type(self).default_net_builder
        self.model = self.build_model() if self.learned else None

    @property
    def trained(self):
        return not self.learned or self.it > 0

    @property
    def max_samples(self):
        """largest number of distinct draws per prediction (None when unbounded)"""
        return None

    @property
    def train_tp(self):
        """horizon the network is trained on"""
        return self.tp

    def net_kwargs(self):
        return {}

    def build_model(self):
        return self.net_builder(seed=self.seed, grid_size=self.grid_size, th=self.th, tp=self.train_tp,
                                latent_dim=self.latent_dim, map_history=self.map_history, use_mask=self.use_mask,
                                **self.net_kwargs())

    def set_data_loader(self, loader_dict):
        self.loader_dict = loader_dict
        if 'train' in loader_dict and not getattr(self.args, 'num_train_iter', 0):
            self.num_train_iter = self.epochs * len(loader_dict['train'])
        if 'train' in loader_dict and not self.num_eval_iter:
            self.num_eval_iter = max(len(loader_dict['train']), 1)
        self.print_fn(f'[!] data loader keys: {list(self.loader_dict.keys())}')

    def set_optimizer(self, optimizer, scheduler=None):
        self.optimizer = optimizer
        self.scheduler = scheduler

    def build_optimizer(self):
        """optimizer and cosine schedule from the run arguments"""
        args = self.args
        optimizer = get_optimizer(self.model, args.optim, args.lr, args.momentum, args.weight_decay)
        scheduler = get_cosine_schedule_with_warmup(optimizer, max(self.num_train_iter, 1),
                                                    num_warmup_steps=args.lr_warm_up * self.num_train_iter)
        self.set_optimizer(optimizer, scheduler)
        return optimizer, scheduler

    def process_batch(self, **kwargs):
        """
        process batch data
        NOTE **kwargs should have the same arguments to train_step function as keys to work properly
        """
        input_args = list(signature(self.train_step).parameters.keys())
        return {arg: var for arg, var in kwargs.items() if arg in input_args and var is not None}

    def check_divergence(self, total_loss, **components):
        """raise DivergenceError when the loss is not finite"""
        if np.isfinite(total_loss.item()):
            return
        parts = ', '.join(f"{k}={'n/a' if v is None else v.item()}" for k, v in components.items())
        bad = next((name for name, p in self.model.named_parameters() if not np.all(np.isfinite(p.data))), None)
        culprit = f"parameter {bad} is non-finite" if bad else "all parameters are finite"
        raise DivergenceError(f"non-finite loss {total_loss.item()} at iteration {self.it} ({parts}); {culprit}")

    def parameter_update(self, loss):
        """
        # parameter updates
        """
        loss.backward()
        for name, p in self.model.named_parameters():
            if p.has_grad and not np.all(np.isfinite(p.grad)):
                raise DivergenceError(f"non-finite gradient of {name} at iteration {self.it} (loss {loss.item()})")
        if self.clip_grad > 0:
            clip_grad_norm(self.model.parameters(), self.clip_grad)
        self.optimizer.step()

        if self.scheduler is not None:
            self.scheduler.step()
        self.model.zero_grad()

    def train_step(self, x1, x2, x3, x4, y):
        """
        train_step specific to each method
        """
        # compute loss
        # update model
        # record tb_dict
        # return tb_dict
        raise NotImplementedError

    def after_train_step(self):
        """
        evaluate, save model and printing log
        """
        if 'eval' in self.loader_dict and self.num_eval_iter and (self.it + 1) % self.num_eval_iter == 0:
            eval_dict = self.evaluate('eval')
            self.tb_dict.update(eval_dict)
            save_path = self.save_path
            if save_path is not None:
                self.save_model('latest_model.npz', save_path)
            if eval_dict['eval/score'] < self.best_eval_score:
                self.best_eval_score = eval_dict['eval/score']
                self.best_it = self.it
                if save_path is not None:
                    self.save_model('model_best.npz', save_path)
            self.print_fn(f"{self.it} iteration, {self.tb_dict}, BEST_EVAL_SCORE: {self.best_eval_score:.4f}, "
                          f"at {self.best_it} iters")

        if self.tb_log is not None:
            self.tb_log.update(self.tb_dict, self.it)
        self.it += 1
        del self.tb_dict

    @property
    def save_path(self):
        if not self.save_dir or not self.save_name:
            return None
        return os.path.join(self.save_dir, self.save_name)

    def train(self):
        """
        train function; returns the per-epoch mean training loss as `loss_history`
        """
        if not self.learned:
            self.print_fn(f"{self.algorithm} is rule based, nothing to train")
            return {'loss_history': []}
        if 'train' not in self.loader_dict:
            raise ConfigurationError("set_data_loader needs a 'train' loader before training")
        if len(self.loader_dict['train']) == 0:
            raise ConfigurationError("the training set is empty")
        if self.optimizer is None:
            self.build_optimizer()

        self.model.train()
        train_loader = self.loader_dict['train']
        for epoch in range(self.epochs):
            self.epoch = epoch

            # prevent the training iterations exceed num_train_iter
            if self.it >= self.num_train_iter:
                break

            train_loader.sampler.set_epoch(epoch)
            bar = Bar(f'Epoch {epoch}', max=len(train_loader))
            meter = AverageMeter()
            for data in train_loader:
                if self.it >= self.num_train_iter:
                    break

                self.tb_dict = self.train_step(**self.process_batch(**data))
                self.tb_dict['lr'] = self.optimizer.param_groups[0]['lr']
                meter.update(self.tb_dict['train/total_loss'], len(data['vehicle_id']))

                bar.suffix = "Iter: {it:5}/{total:5} | Loss: {loss:.4f}".format(
                    it=self.it + 1, total=self.num_train_iter, loss=self.tb_dict['train/total_loss'])
                bar.next()
                self.after_train_step()
            bar.finish()
            self.loss_history.append(float(meter.avg))
            self.print_fn(f"epoch {epoch}: mean training loss {meter.avg:.6f}")

        return {'loss_history': list(self.loss_history), 'eval/best_score': self.best_eval_score,
                'eval/best_it': self.best_it}

    # -- prediction -------------------------------------------------------
    def predict_samples(self, batch, n_samples, seed=0, group1=None):
        """
        Draw n futures for every row of a collated batch.

        Row b draws from `default_rng([seed, *batch['rng_keys'][b]])`, so its
        samples do not depend on the other rows.

        Returns:
            (y [B, n, Tp, 2], z [B, n, latent_dim] or None)
        """
        raise NotImplementedError

    def shared_features(self, batch):
        """scene features computed once and reused for every vehicle (None when the method has none)"""
        return None

    def predict(self, samples, n_samples=20, seed=0, batch_size=None):
        """
        Sample futures for every vehicle of one scene.

        Args:
            samples: TrainingSamples sharing one frame (e.g. from `scene_histories`)
        Returns:
            dict vehicle id -> list of n PredictionSample
        """
        samples = list(samples)
        out = {}
        if not samples:
            return out
        batch_size = batch_size or getattr(self.args, 'eval_batch_size', 256)
        group1 = self.shared_features(collate(samples[:1], self.map_history))
        for start in range(0, len(samples), batch_size):
            chunk = samples[start:start + batch_size]
            batch = collate(chunk, self.map_history)
            batch['rng_keys'] = [(s.vehicle_id,) for s in chunk]
            y, z = self.predict_samples(batch, n_samples, seed, group1=group1)
            for b, s in enumerate(chunk):
                out[s.vehicle_id] = [PredictionSample.from_array(y[b, k], None if z is None else z[b, k])
                                     for k in range(n_samples)]
        return out

    def predict_scene(self, frames, encoder, n_samples=20, seed=0, vehicle_ids=None):
        """
        Predict every vehicle present over the last Th frames of `frames`.
        """
        frames = list(frames)[-self.th:]
        return self.predict(scene_histories(frames, encoder, vehicle_ids), n_samples, seed)

    def predict_loader(self, data_loader, n_samples=20, seed=0):
        """
        Returns:
            (predictions [N, n, Tp, 2], ground truth [N, Tp, 2], keys [(ep, t, vehicle id)])
        """
        preds, gts, keys = [], [], []
        for batch in data_loader:
            y, _ = self.predict_samples(batch, n_samples, seed)
            preds.append(y[:, :, :self.tp])
            gts.append(batch['y'][:, :self.tp])
            keys.extend(batch['rng_keys'])
        if not preds:
            raise ConfigurationError("cannot predict on an empty data loader")
        return np.concatenate(preds), np.concatenate(gts), keys

    def evaluate(self, eval_dest='eval'):
        """
        evaluation function: RMSE of v and theta per horizon, averaged over draws.
        `eval/score` (v RMSE / v scale + theta RMSE / 180 at the last horizon) ranks checkpoints.
        """
        eval_loader = self.loader_dict[eval_dest]
        pred, y, _ = self.predict_loader(eval_loader, self.eval_samples, self.seed)
        rmse = rmse_per_draw(pred, y).mean(axis=0)
        eval_dict = {}
        for h in range(rmse.shape[0]):
            horizon = round((h + 1) * 0.2, 1)
            eval_dict[f'{eval_dest}/v_rmse@{horizon}'] = float(rmse[h, 0])
            eval_dict[f'{eval_dest}/theta_rmse@{horizon}'] = float(rmse[h, 1])
        eval_dict[f'{eval_dest}/score'] = float(rmse[-1, 0] / 12.0 + rmse[-1, 1] / 180.0)
        return eval_dict

    # -- checkpoints ------------------------------------------------------
    def net_config(self):
        model = self.model.members[0] if isinstance(self.model, Ensemble) else self.model
        return model.config.to_dict()

    def get_save_dict(self):
        """
        make easier for saving model when need save additional arguments

        Returns:
            (state_dict, header)
        """
        header = {
            'variant': self.variant,
            'latent_dim': self.latent_dim,
            'th': self.th,
            'tp': self.tp,
            'train_tp': self.train_tp,
            'grid_resolution': self.grid_resolution,
            'grid_size': self.grid_size,
            'map_history': self.map_history,
            'use_mask': self.use_mask,
            'net': self.net_config(),
            'loss_history': list(self.loss_history),
            'seed': self.seed,
            'it': self.it,
        }
        if isinstance(self.model, Ensemble):
            header['members'] = len(self.model)
        return self.model.state_dict(), header

    def save_model(self, save_name, save_path):
        """
        save parameters and the run description
        """
        if not self.learned:
            raise ConfigurationError(f"{self.algorithm} has no parameters to save")
        save_filename = os.path.join(save_path, save_name)
        state_dict, header = self.get_save_dict()
        save_checkpoint(save_filename, state_dict, header)
        self.print_fn(f"model saved: {save_filename}")
        return save_filename

    def load_model(self, load_path):
        """
        load parameters saved by `save_model`
        """
        if not self.learned:
            raise ConfigurationError(f"{self.algorithm} is rule based and loads no checkpoint")
        state_dict, header = load_checkpoint(load_path, variant=self.variant)
        for key in ('th', 'tp', 'grid_size', 'latent_dim'):
            if header.get(key) != getattr(self, key):
                raise ConfigurationError(f"{load_path}: checkpoint {key}={header.get(key)} "
                                         f"does not match the run ({getattr(self, key)})")
        self.model.load_state_dict(state_dict)
        self.loss_history = list(header.get('loss_history', []))
        self.it = header.get('it', 0)
        self.print_fn('model loaded')
        return header

    @staticmethod
    def get_argument():
        """
        Get specificed arguments into argparse for each method
        """
        return []
