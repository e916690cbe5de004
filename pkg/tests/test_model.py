# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import os
from dataclasses import replace

import numpy as np
import pytest

from conftest import constant_velocity_frames, run_args
from maiplab.algorithms import cvae_loss, get_algorithm, kl_divergence, load_algorithm, wrapped_squared_error
from maiplab.algorithms.maip_recursive.maip_recursive import advance_sample, recursive_rollout
from maiplab.autodiff import Tensor
from maiplab.datasets import GridEncoder, make_training_samples, vehicle_state_vector
from maiplab.errors import ConfigurationError, ShapeError, UsageError
from maiplab.evaluation import cluster_modes
from maiplab.lighting import Trainer
from maiplab.nets import maip_net, read_checkpoint_header, reparameterize
from maiplab.sim import Episode
from maiplab.utils import get_dataset


def zero_net(**kwargs):
    net = maip_net(grid_size=10, **kwargs)
    for _, p in net.named_parameters():
        p.data[...] = 0.0
    return net


def zero_inputs(batch=2, grid=10):
    return (np.zeros((1, 1, grid, grid)), np.zeros((batch, 1, grid, grid)), np.zeros((batch, 1, grid, grid)),
            np.zeros((batch, 5, 8)))


class TestLosses:
    def test_kl_of_matched_prior(self):
        assert kl_divergence(np.zeros(2), np.zeros(2)).item() == 0.0

    def test_kl_unit_shift(self):
        assert kl_divergence(np.array([1.0, 0.0]), np.zeros(2)).item() == pytest.approx(0.5)

    def test_kl_matches_monte_carlo(self):
        mu, logvar = np.array([0.3, -0.5]), np.array([0.2, -0.4])
        rng = np.random.default_rng(0)
        std = np.exp(0.5 * logvar)
        z = mu + std * rng.standard_normal((100000, 2))
        log_q = -0.5 * np.sum(((z - mu) / std) ** 2 + logvar + np.log(2 * np.pi), axis=1)
        log_p = -0.5 * np.sum(z ** 2 + np.log(2 * np.pi), axis=1)
        assert kl_divergence(mu, logvar).item() == pytest.approx(np.mean(log_q - log_p), abs=2e-2)

    def test_kl_batch_mean(self):
        mu = np.array([[1.0, 0.0], [0.0, 0.0]])
        assert kl_divergence(mu, np.zeros((2, 2))).item() == pytest.approx(0.25)

    def test_angle_wrap(self):
        loss = wrapped_squared_error(Tensor([[0.0, 179.0]]), np.array([[0.0, -179.0]]))
        assert loss.item() == pytest.approx(4.0)

    def test_perfect_reconstruction(self):
        y = np.array([[[5.0, 10.0], [5.5, 12.0]]])
        total, recon, kl = cvae_loss(Tensor(y), y, np.zeros((1, 2)), np.zeros((1, 2)), beta=0.5)
        assert total.item() == 0.0
        assert recon.item() == 0.0 and kl.item() == 0.0

    def test_beta_zero_is_reconstruction(self):
        y_hat, y = Tensor([[[5.0, 10.0]]]), np.array([[[4.0, 14.0]]])
        mu = np.array([[1.0, -1.0]])
        total, recon, _ = cvae_loss(y_hat, y, mu, np.zeros((1, 2)), beta=0.0)
        assert total.item() == recon.item() == pytest.approx(17.0)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            wrapped_squared_error(Tensor(np.zeros((1, 5, 2))), np.zeros((1, 4, 2)))

    def test_kl_gradient(self):
        mu = Tensor([0.5, -1.0], requires_grad=True)
        logvar = Tensor([0.1, 0.3], requires_grad=True)
        kl_divergence(mu, logvar).backward()
        np.testing.assert_allclose(mu.grad, [0.5, -1.0])
        np.testing.assert_allclose(logvar.grad, 0.5 * (np.exp([0.1, 0.3]) - 1.0))


class TestReparameterize:
    def test_mean_draw(self):
        mu = np.array([[0.4, -0.2]])
        np.testing.assert_array_equal(reparameterize(mu, np.array([[1.0, 2.0]]), np.zeros((1, 2))).data, mu)

    def test_unit_scale(self):
        mu = np.array([[0.4, -0.2]])
        z = reparameterize(mu, np.zeros((1, 2)), np.array([[1.0, -1.0]]))
        np.testing.assert_allclose(z.data, mu + [1.0, -1.0])

    def test_eps_shape(self):
        with pytest.raises(ShapeError):
            reparameterize(np.zeros((1, 2)), np.zeros((1, 2)), np.zeros((1, 3)))


class TestNetwork:
    def test_bias_only_fusion(self):
        net = zero_net()
        bias = np.linspace(-1.0, 1.0, net.config.fuse_dim)
        net.fc5.bias.data[...] = bias
        xout = net.fuse_features(*zero_inputs())
        np.testing.assert_allclose(xout.data, np.tile(np.tanh(bias), (2, 1)))

    def test_latent_heads_pass_bias(self):
        net = zero_net()
        net.enc_mu.bias.data[...] = [0.3, -0.7]
        net.enc_logvar.bias.data[...] = [0.1, 0.2]
        xout = net.fuse_features(*zero_inputs(1))
        mu, logvar = net.encode_latent(xout, np.zeros((1, 5, 2)))
        np.testing.assert_allclose(mu.data, [[0.3, -0.7]])
        np.testing.assert_allclose(logvar.data, [[0.1, 0.2]])

    def test_encode_latent_is_training_only(self):
        net = zero_net()
        xout = net.fuse_features(*zero_inputs(1))
        net.eval()
        with pytest.raises(UsageError):
            net.encode_latent(xout, np.zeros((1, 5, 2)))

    def test_zero_decoder_is_constant(self):
        net = zero_net()
        rng = np.random.default_rng(0)
        a = net.decode(rng.normal(size=(3, 2)), rng.normal(size=(3, 16))).data
        b = net.decode(rng.normal(size=(3, 2)), rng.normal(size=(3, 16))).data
        np.testing.assert_array_equal(a, b)
        np.testing.assert_allclose(a[..., 0], 12.0 * np.log(2.0))
        np.testing.assert_allclose(a[..., 1], 0.0)

    def test_speed_is_non_negative(self):
        net = maip_net(grid_size=10, seed=3)
        rng = np.random.default_rng(1)
        y = net.decode(rng.normal(scale=5.0, size=(50, 2)), rng.normal(scale=5.0, size=(50, 16))).data
        assert y.shape == (50, 5, 2)
        assert (y[..., 0] >= 0.0).all()

    def test_input_shapes_checked(self):
        net = maip_net(grid_size=10)
        x1, x2, x3, x4 = zero_inputs()
        with pytest.raises(ShapeError):
            net.fuse_features(x1, x2, x3, np.zeros((2, 4, 8)))
        with pytest.raises(ShapeError):
            net.fuse_features(x1, np.zeros((2, 1, 12, 12)), x3, x4)

    def test_checkpoint_order_is_stable(self):
        assert [n for n, _ in maip_net(grid_size=10).named_parameters()] == \
            [n for n, _ in maip_net(grid_size=10, seed=5).named_parameters()]


class TestPrediction:
    def test_twenty_samples_per_vehicle(self, make_args, coarse_samples):
        algorithm = get_algorithm(make_args())
        scene = [s for s in coarse_samples if s.t == coarse_samples[0].t]
        out = algorithm.predict(scene, n_samples=20, seed=0)
        assert set(out) == {s.vehicle_id for s in scene}
        assert all(len(draws) == 20 for draws in out.values())
        assert all(d.v.shape == (5,) and d.z.shape == (2,) for d in out[scene[0].vehicle_id])

    def test_same_seed_same_samples(self, make_args, coarse_samples):
        algorithm = get_algorithm(make_args())
        a = algorithm.predict(coarse_samples[:2], 5, seed=1)
        b = algorithm.predict(coarse_samples[:2], 5, seed=1)
        vid = coarse_samples[0].vehicle_id
        np.testing.assert_array_equal(np.stack([d.as_array() for d in a[vid]]),
                                      np.stack([d.as_array() for d in b[vid]]))

    def test_many_agents_share_group_one(self, make_args, coarse_samples):
        algorithm = get_algorithm(make_args())
        scene = [replace(coarse_samples[0], vehicle_id=k) for k in range(29)]
        calls = []
        group1 = algorithm.model.group1

        def counting_group1(*args, **kwargs):
            calls.append(1)
            return group1(*args, **kwargs)

        algorithm.model.group1 = counting_group1
        out = algorithm.predict(scene, n_samples=3, seed=0)
        assert len(out) == 29
        assert len(calls) == 1
        # a vehicle's draws do not depend on the rest of the batch
        alone = algorithm.predict(scene[7:8], n_samples=3, seed=0)
        np.testing.assert_allclose(alone[7][0].as_array(), out[7][0].as_array(), rtol=1e-12)

    def test_predict_scene(self, make_args, episode, coarse_encoder):
        algorithm = get_algorithm(make_args())
        out = algorithm.predict_scene(episode.frames[:8], coarse_encoder, n_samples=4)
        present = set.intersection(*(set(f.vehicle_ids) for f in episode.frames[3:8]))
        assert set(out) == present


class TestRecursive:
    def test_oracle_rollout_has_zero_error(self, world):
        frames = constant_velocity_frames(world, 10)
        sample = make_training_samples(Episode(frames), 5, 5, GridEncoder(world, 10.0))[0]

        def oracle(current):
            return np.tile([8.0, 90.0], (len(current), 1))

        y = recursive_rollout([sample], oracle, 5)
        np.testing.assert_allclose(y[0], sample.y, atol=1e-9)

    def test_advance_matches_next_frame(self, world):
        frames = constant_velocity_frames(world, 10)
        sample = make_training_samples(Episode(frames), 5, 5, GridEncoder(world, 10.0))[0]
        nxt = advance_sample(sample, 8.0, 90.0)
        expected = vehicle_state_vector(frames[5], 0)
        np.testing.assert_allclose(nxt.x4[-1], expected, atol=1e-9)
        np.testing.assert_array_equal(nxt.x4[:-1], sample.x4[1:])
        assert nxt.t == sample.t + 1

    def test_one_step_network_predicts_full_horizon(self, make_args, coarse_samples):
        algorithm = get_algorithm(make_args('maip_recursive'))
        assert algorithm.train_tp == 1
        assert algorithm.model.config.tp == 1
        out = algorithm.predict(coarse_samples[:1], n_samples=2, seed=0)
        draws = next(iter(out.values()))
        assert len(draws) == 2 and draws[0].tp == 5


class TestTraining:
    def fit(self, make_args, samples, **overrides):
        args = make_args(**{'epoch': 2, 'batch_size': 4, 'lr': 1e-3, **overrides})
        algorithm = get_algorithm(args)
        result = Trainer(args, algorithm).fit(samples)
        return args, algorithm, result

    def test_same_seed_same_parameters(self, make_args, coarse_samples):
        _, a, _ = self.fit(make_args, coarse_samples[:6])
        _, b, _ = self.fit(make_args, coarse_samples[:6])
        for (name, pa), (_, pb) in zip(a.model.named_parameters(), b.model.named_parameters()):
            np.testing.assert_array_equal(pa.data, pb.data, err_msg=name)

    def test_loss_history_and_checkpoint(self, make_args, coarse_samples):
        args, algorithm, result = self.fit(make_args, coarse_samples[:6])
        assert len(result['loss_history']) == 2
        assert all(np.isfinite(result['loss_history']))
        path = os.path.join(args.save_dir, args.save_name, 'latest_model.npz')
        header = read_checkpoint_header(path)
        assert header['variant'] == 'maip'
        assert header['it'] == algorithm.it == 4

    def test_checkpoint_round_trip(self, make_args, coarse_samples):
        args, algorithm, _ = self.fit(make_args, coarse_samples[:6])
        path = os.path.join(args.save_dir, args.save_name, 'latest_model.npz')
        loaded = load_algorithm(path, make_args())
        for (name, pa), (_, pb) in zip(algorithm.model.named_parameters(), loaded.model.named_parameters()):
            np.testing.assert_array_equal(pa.data, pb.data, err_msg=name)
        assert loaded.loss_history == algorithm.loss_history
        a = algorithm.predict(coarse_samples[:1], 4, seed=2)
        b = loaded.predict(coarse_samples[:1], 4, seed=2)
        vid = coarse_samples[0].vehicle_id
        np.testing.assert_array_equal(a[vid][3].as_array(), b[vid][3].as_array())

    def test_checkpoint_shape_mismatch(self, make_args, coarse_samples):
        args, algorithm, _ = self.fit(make_args, coarse_samples[:6])
        path = os.path.join(args.save_dir, args.save_name, 'latest_model.npz')
        other = get_algorithm(make_args(latent_dim=3))
        with pytest.raises(ConfigurationError):
            other.load_model(path)

    def test_empty_training_set(self, make_args):
        algorithm = get_algorithm(make_args())
        algorithm.set_data_loader({'train': []})
        with pytest.raises(ConfigurationError):
            algorithm.train()

    @pytest.mark.slow
    def test_memorizes_one_sample(self, make_args, coarse_samples):
        args = make_args(epoch=1500, batch_size=1, lr=3e-3, beta=0.0, lr_warm_up=0.0)
        algorithm = get_algorithm(args)
        Trainer(args, algorithm).fit(coarse_samples[:1])
        assert algorithm.loss_history[-1] < 1e-2


class TestGradientCheck:
    @pytest.mark.parametrize('method', ['maip', 'cnn_cvae', 'maip_recursive'])
    def test_analytic_gradients_match(self, make_args, coarse_samples, method):
        algorithm = get_algorithm(make_args(method))
        report = algorithm.gradient_check(coarse_samples[:1], max_entries=4)
        assert report.passed, report.format()
        assert report.max_rel_error < 1e-3

    def test_stacked_history(self, make_args, coarse_samples):
        algorithm = get_algorithm(make_args(map_history='stacked'))
        assert algorithm.model.config.map_channels == 5
        report = algorithm.gradient_check(coarse_samples[:2], max_entries=3)
        assert report.passed, report.format()


@pytest.fixture(scope='module')
def desk_data(tmp_path_factory):
    # 20 episodes of 300 frames, split 16 / 4 by episode
    args = run_args(tmp_path_factory.mktemp('desk'), episodes=20, n_frames=300, seed=0)
    return get_dataset(args)


@pytest.fixture(scope='module')
def desk_maip(desk_data, tmp_path_factory):
    args = run_args(tmp_path_factory.mktemp('maip'), epoch=3, batch_size=64, lr=1e-3)
    trainer = Trainer(args, get_algorithm(args))
    trainer.fit(desk_data['train'])
    return trainer


def approaching_samples(data, lanes=(0, 2)):
    """first sample of every vehicle on the given lane types, up to 14 m before its stop line"""
    episodes = {e.ep: e for e in data['eval_episodes']}
    dataset = data['eval']
    seen = set()
    for i in range(len(dataset)):
        sample = dataset[i]
        key = (sample.ep, sample.vehicle_id)
        if sample.lane % 3 not in lanes or key in seen:
            continue
        vehicle = episodes[sample.ep].frames[sample.t].vehicle(sample.vehicle_id)
        heading = np.radians(vehicle.theta)
        towards_centre = np.cos(heading) * vehicle.x + np.sin(heading) * vehicle.y < 0.0
        if towards_centre and 16.0 < max(abs(vehicle.x), abs(vehicle.y)) < 30.0:
            seen.add(key)
            yield sample


class TestDeskScale:
    @pytest.mark.slow
    def test_learning_beats_constant_velocity(self, desk_data, desk_maip, tmp_path):
        history = desk_maip.algorithm.loss_history
        assert len(history) == 3
        assert history[-1] < history[0]
        table = desk_maip.evaluate(desk_data['eval'], n_samples=10)
        args = run_args(tmp_path, 'const_vel')
        baseline = Trainer(args, get_algorithm(args)).evaluate(desk_data['eval'])
        assert table.get('maip', 1.0, 'v').mean < baseline.get('const_vel', 1.0, 'v').mean

    @pytest.mark.slow
    def test_branching_lanes_are_multimodal(self, desk_data, desk_maip):
        multimodal = checked = 0
        for sample in approaching_samples(desk_data):
            draws = desk_maip.algorithm.predict([sample], n_samples=100, seed=0)[sample.vehicle_id]
            checked += 1
            multimodal += cluster_modes(draws).count >= 2
            if multimodal >= 3 or checked >= 60:
                break
        assert multimodal >= 3

    @pytest.mark.slow
    def test_recursive_errors_grow_with_horizon(self, desk_data, tmp_path):
        args = run_args(tmp_path, 'maip_recursive', epoch=2, batch_size=64, lr=1e-3)
        trainer = Trainer(args, get_algorithm(args))
        trainer.fit(desk_data['train'])
        table = trainer.evaluate(desk_data['eval'], n_samples=5)
        for metric in ('v', 'theta'):
            assert table.get('maip_recursive', 1.0, metric).mean > table.get('maip_recursive', 0.2, metric).mean
