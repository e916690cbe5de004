# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import numpy as np

from maiplab.algorithms.algorithmbase import AlgorithmBase
from maiplab.algorithms.utils import Argument, wrapped_squared_error
from maiplab.autodiff import no_grad
from maiplab.errors import ConfigurationError
from maiplab.nets import cnn_lstm_net


class CNNLSTM(AlgorithmBase):
    """
        Ensemble of deterministic CNN-LSTM regressors (MAIP's feature fusion with
        the decoder reading Xout only). Independently initialized members give
        the spread of the prediction: draw k is member k.

        Args:
        - ensemble_size (`int`, *optional*, defaults to 5):
            number of members
    """
    variant = 'cnn_lstm'
    default_net_builder = staticmethod(cnn_lstm_net)

    def __init__(self, args, net_builder=None, tb_log=None, logger=None, **kwargs):
        self.ensemble_size = args.ensemble_size
        super().__init__(args, net_builder, tb_log, logger, **kwargs)

    def net_kwargs(self):
        return {'ensemble_size': self.ensemble_size}

    @property
    def max_samples(self):
        return len(self.model)

    @property
    def loss_scale(self):
        config = self.model.members[0].config
        return config.v_scale, config.theta_scale

    def train_step(self, x1, x2, x3, x4, y):
        y = y[:, :self.train_tp]
        losses = [wrapped_squared_error(member(x1, x2, x3, x4)['y_hat'], y, self.loss_scale)
                  for member in self.model.members]
        total_loss = losses[0]
        for loss in losses[1:]:
            total_loss = total_loss + loss
        total_loss = total_loss * (1.0 / len(losses))
        self.check_divergence(total_loss, recon=total_loss)

        self.parameter_update(total_loss)

        tb_dict = {}
        tb_dict['train/recon_loss'] = total_loss.item()
        tb_dict['train/kl_loss'] = 0.0
        tb_dict['train/total_loss'] = total_loss.item()
        tb_dict['train/beta'] = 0.0
        return tb_dict

    def predict_samples(self, batch, n_samples, seed=0, group1=None):
        if n_samples > len(self.model):
            raise ConfigurationError(f"the {len(self.model)}-member ensemble gives at most {len(self.model)} "
                                     f"samples, {n_samples} requested")
        self.model.eval()
        try:
            with no_grad():
                ys = [m.decode(None, m.fuse_features(batch['x1'], batch['x2'], batch['x3'], batch['x4'])).data
                      for m in self.model.members[:n_samples]]
        finally:
            self.model.train()
        return np.stack(ys, axis=1), None

    @staticmethod
    def get_argument():
        return [
            Argument('--ensemble_size', int, 5, 'number of independently initialized members'),
        ]
