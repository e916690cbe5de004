# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import numpy as np

from maiplab.algorithms.algorithmbase import AlgorithmBase
from maiplab.algorithms.utils import Argument, cvae_loss
from maiplab.autodiff import Tensor, check_gradients, no_grad
from maiplab.datasets.sampler import collate
from maiplab.nets import maip_net


class MAIP(AlgorithmBase):
    """
        Multi-agent interactive prediction: two-group feature fusion followed by
        a CVAE over the (v, theta) future. Only the decoder is used at prediction
        time, with z drawn from the standard normal prior.

        Args:
        - args (`argparse`):
            method arguments
        - net_builder (`callable`):
            network building function
        - tb_log (`TBLog`):
            tensorboard logger
        - logger (`logging.Logger`):
            logger to use
        - beta (`float`, *optional*, defaults to 0.5):
            weight of the KL term
        - beta_warm_up (`float`, *optional*, defaults to 0.1):
            fraction of the training iterations over which beta ramps up linearly
    """
    variant = 'maip'
    default_net_builder = staticmethod(maip_net)

    def __init__(self, args, net_builder=None, tb_log=None, logger=None, **kwargs):
        super().__init__(args, net_builder, tb_log, logger, **kwargs)
        self.init(beta=args.beta, beta_warm_up=args.beta_warm_up)

    def init(self, beta=0.5, beta_warm_up=0.1):
        self.beta = beta
        self.beta_warm_up = beta_warm_up

    @property
    def loss_scale(self):
        # the loss is taken on (v / v_scale, theta / theta_scale) so both terms weigh alike
        return self.model.config.v_scale, self.model.config.theta_scale

    def current_beta(self):
        if self.beta_warm_up <= 0 or self.num_train_iter <= 0:
            return self.beta
        return self.beta * float(np.clip(self.it / (self.beta_warm_up * self.num_train_iter), a_min=0.0, a_max=1.0))

    def train_step(self, x1, x2, x3, x4, y):
        y = y[:, :self.train_tp]
        eps = self.rng.standard_normal((y.shape[0], self.latent_dim))
        out = self.model(x1, x2, x3, x4, y=y, eps=eps)

        beta = self.current_beta()
        total_loss, recon_loss, kl_loss = cvae_loss(out['y_hat'], y, out['mu'], out['logvar'], beta,
                                                    self.loss_scale)
        self.check_divergence(total_loss, recon=recon_loss, kl=kl_loss)

        # parameter updates
        self.parameter_update(total_loss)

        tb_dict = {}
        tb_dict['train/recon_loss'] = recon_loss.item()
        tb_dict['train/kl_loss'] = kl_loss.item()
        tb_dict['train/total_loss'] = total_loss.item()
        tb_dict['train/beta'] = beta
        return tb_dict

    def gradient_check(self, samples, delta=1e-4, rtol=1e-3, max_entries=None):
        """
        Finite-difference check of every parameter gradient of the training loss
        on a fixed batch with a fixed latent draw.

        Returns:
            GradCheckReport
        """
        batch = collate(list(samples), self.map_history)
        y = batch['y'][:, :self.train_tp]
        eps = np.random.default_rng(self.seed).standard_normal((y.shape[0], self.latent_dim))
        inputs = [batch[k] for k in ('x1', 'x2', 'x3', 'x4')]

        def loss_fn():
            out = self.model(*inputs, y=y, eps=eps)
            return cvae_loss(out['y_hat'], y, out['mu'], out['logvar'], self.beta, self.loss_scale)[0]

        self.model.train()
        return check_gradients(loss_fn, self.model.named_parameters(), delta, rtol, max_entries, self.seed)

    def shared_features(self, batch):
        self.model.eval()
        try:
            with no_grad():
                return self.model.group1(batch['x1'], None if self.use_mask else batch['x2'])
        finally:
            self.model.train()

    def decode_batch(self, batch, z, group1=None):
        """
        Decode latent draws z [B, k, latent_dim] against each row's fused features.

        Returns:
            [B, k, train_tp, 2]
        """
        z = np.asarray(z, dtype=np.float64)
        rows, k = z.shape[:2]
        self.model.eval()
        try:
            with no_grad():
                xout = self.model.fuse_features(batch['x1'], batch['x2'], batch['x3'], batch['x4'], group1)
                y = self.model.decode(z.reshape(rows * k, -1), Tensor(np.repeat(xout.data, k, axis=0))).data
        finally:
            self.model.train()
        return y.reshape(rows, k, self.train_tp, 2)

    def draw_latents(self, keys, n_samples, seed):
        return np.stack([np.random.default_rng([seed, *key]).standard_normal((n_samples, self.latent_dim))
                         for key in keys])

    def predict_samples(self, batch, n_samples, seed=0, group1=None):
        z = self.draw_latents(batch['rng_keys'], n_samples, seed)
        return self.decode_batch(batch, z, group1), z

    @staticmethod
    def get_argument():
        return [
            Argument('--beta', float, 0.5, 'weight of the KL term'),
            Argument('--beta_warm_up', float, 0.1, 'fraction of training iterations over which beta ramps up'),
        ]
