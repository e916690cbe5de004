# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import os

from maiplab.datasets import get_data_loader
from maiplab.evaluation import rmse_table
from maiplab.utils import get_logger


class Trainer:
    def __init__(self, config, algorithm, verbose=0):
        self.config = config
        self.verbose = verbose
        self.algorithm = algorithm

        # setup logger
        self.save_path = os.path.join(config.save_dir, config.save_name)
        self.logger = get_logger(config.save_name, save_path=self.save_path, level="INFO")
        if self.algorithm.logger is None:
            self.algorithm.logger = self.logger
            self.algorithm.print_fn = self.logger.info

    def train_loader(self, dataset):
        return get_data_loader(dataset, self.config.batch_size, shuffle=True, seed=self.config.seed,
                               map_history=self.config.map_history)

    def eval_loader(self, dataset):
        return get_data_loader(dataset, self.config.eval_batch_size, shuffle=False,
                               map_history=self.config.map_history)

    def fit(self, train_dataset, eval_dataset=None):
        loader_dict = {'train': self.train_loader(train_dataset)}
        if eval_dataset is not None and len(eval_dataset):
            loader_dict['eval'] = self.eval_loader(eval_dataset)
        self.algorithm.set_data_loader(loader_dict)
        if not self.algorithm.learned:
            return self.algorithm.train()

        self.algorithm.build_optimizer()
        result = self.algorithm.train()

        # save model
        self.algorithm.save_model('latest_model.npz', self.save_path)
        if 'eval' in loader_dict:
            self.logger.info("Best score {:.4f} at iteration {:d}".format(result['eval/best_score'],
                                                                          result['eval/best_it']))
        self.logger.info("Training finished.")
        return result

    def n_draws(self, n_samples):
        max_samples = self.algorithm.max_samples
        if max_samples is not None and n_samples > max_samples:
            self.logger.info(f"{self.algorithm.algorithm} gives at most {max_samples} draws, using {max_samples}")
            return max_samples
        return n_samples

    def predict(self, dataset, n_samples=None, seed=None):
        """
        Returns:
            (predictions [N, n, Tp, 2], ground truth [N, Tp, 2], keys [(ep, t, vehicle id)])
        """
        n_samples = self.n_draws(n_samples or self.config.n_samples)
        seed = self.config.seed if seed is None else seed
        return self.algorithm.predict_loader(self.eval_loader(dataset), n_samples, seed)

    def evaluate(self, dataset, n_samples=None, seed=None):
        """RMSE table of the method on `dataset`"""
        pred, y, _ = self.predict(dataset, n_samples, seed)
        name = self.algorithm.algorithm
        deterministic = (name,) if self.algorithm.deterministic else ()
        table = rmse_table({name: pred}, y, deterministic=deterministic)
        self.logger.info("evaluation metric on {:d} samples, {:d} draws".format(pred.shape[0], pred.shape[1]))
        for line in table.format_table().splitlines():
            self.logger.info(line)
        return table
