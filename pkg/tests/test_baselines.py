# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from dataclasses import replace

import numpy as np
import pytest

from conftest import constant_velocity_frames
from maiplab.algorithms import BaselineVariant, baseline_predict, const_vel_predict, get_algorithm, idm_predict
from maiplab.datasets import GridEncoder, make_training_samples
from maiplab.errors import ConfigurationError
from maiplab.sim import FREE_ROAD_GAP, Episode, IDMParams


@pytest.fixture
def cruising(world):
    frames = constant_velocity_frames(world, 10)
    return make_training_samples(Episode(frames), 5, 5, GridEncoder(world, 10.0))[0]


def with_speed(sample, v):
    x4 = sample.x4.copy()
    x4[-1, 3] = v
    return replace(sample, x4=x4)


class TestConstVel:
    def test_repeats_last_state(self, cruising):
        pred = const_vel_predict(cruising, tp=5)
        np.testing.assert_allclose(pred.as_array(), [[8.0, 90.0]] * 5)
        assert pred.z is None

    def test_via_baseline_predict(self, cruising):
        draws = baseline_predict('const_vel', cruising, n=3)
        assert len(draws) == 3
        np.testing.assert_array_equal(draws[0].as_array(), draws[2].as_array())


class TestIDM:
    def test_heading_is_lane_tangent(self, cruising):
        pred = idm_predict(cruising)
        np.testing.assert_allclose(pred.theta, cruising.lane_heading)

    def test_free_road_at_desired_speed(self, cruising):
        params = IDMParams()
        pred = idm_predict(with_speed(cruising, params.v0), params)
        assert cruising.leader_gap == FREE_ROAD_GAP
        np.testing.assert_allclose(pred.v, params.v0, atol=1e-2)

    def test_stopped_leader_slows_down(self, cruising):
        sample = replace(cruising, leader_gap=3.0, leader_speed=0.0)
        pred = idm_predict(sample)
        assert (np.diff(np.concatenate([[8.0], pred.v])) <= 0.0).all()
        assert pred.v[-1] < 8.0
        assert (pred.v >= 0.0).all()

    def test_slower_start_accelerates(self, cruising):
        pred = idm_predict(with_speed(cruising, 2.0))
        assert (np.diff(pred.v) > 0.0).all()


class TestVariants:
    def test_learned_flags(self):
        assert not BaselineVariant.IDM.learned
        assert not BaselineVariant.CONST_VEL.learned
        assert BaselineVariant.CNN_LSTM.learned and BaselineVariant.MAIP_RECURSIVE.learned

    def test_unknown_variant(self, cruising):
        with pytest.raises(ValueError):
            baseline_predict('kalman', cruising)

    @pytest.mark.parametrize('variant', ['cnn_lstm', 'cnn_cvae', 'maip_recursive'])
    def test_learned_variant_needs_training(self, cruising, variant):
        with pytest.raises(ConfigurationError):
            baseline_predict(variant, cruising)

    def test_untrained_model_rejected(self, make_args, cruising):
        algorithm = get_algorithm(make_args('cnn_cvae'))
        with pytest.raises(ConfigurationError):
            baseline_predict('cnn_cvae', cruising, algorithm, n=2)

    def test_model_of_another_variant_rejected(self, make_args, cruising):
        algorithm = get_algorithm(make_args('cnn_cvae'))
        algorithm.it = 1
        with pytest.raises(ConfigurationError):
            baseline_predict('maip_recursive', cruising, algorithm, n=2)

    def test_trained_learned_variant(self, make_args, cruising):
        algorithm = get_algorithm(make_args('cnn_cvae'))
        algorithm.it = 1
        draws = baseline_predict('cnn_cvae', cruising, algorithm, n=4, seed=3)
        assert len(draws) == 4
        assert all(d.tp == 5 for d in draws)


class TestCNNLSTM:
    def test_members_are_samples(self, make_args, cruising):
        algorithm = get_algorithm(make_args('cnn_lstm'))
        assert algorithm.max_samples == 5
        draws = algorithm.predict([cruising], n_samples=5)[cruising.vehicle_id]
        assert len(draws) == 5
        assert all(d.z is None for d in draws)
        # independently initialized members disagree
        assert not np.allclose(draws[0].as_array(), draws[1].as_array())

    def test_repeatable(self, make_args, cruising):
        algorithm = get_algorithm(make_args('cnn_lstm'))
        a = algorithm.predict([cruising], n_samples=5, seed=0)[cruising.vehicle_id]
        b = algorithm.predict([cruising], n_samples=5, seed=9)[cruising.vehicle_id]
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x.as_array(), y.as_array())

    def test_more_draws_than_members(self, make_args, cruising):
        algorithm = get_algorithm(make_args('cnn_lstm', ensemble_size=3))
        with pytest.raises(ConfigurationError):
            algorithm.predict([cruising], n_samples=4)

    def test_trains(self, make_args, coarse_samples):
        from maiplab.lighting import Trainer
        args = make_args('cnn_lstm', ensemble_size=2, epoch=1, batch_size=8)
        algorithm = get_algorithm(args)
        result = Trainer(args, algorithm).fit(coarse_samples[:8])
        assert len(result['loss_history']) == 1
        assert np.isfinite(result['loss_history'][0])


class TestRuleMethods:
    @pytest.mark.parametrize('method', ['idm', 'const_vel'])
    def test_identical_draws(self, make_args, cruising, method):
        algorithm = get_algorithm(make_args(method))
        assert algorithm.trained and algorithm.deterministic
        draws = algorithm.predict([cruising], n_samples=3)[cruising.vehicle_id]
        assert len(draws) == 3
        np.testing.assert_array_equal(draws[0].as_array(), draws[1].as_array())

    def test_nothing_to_save(self, make_args, tmp_path):
        algorithm = get_algorithm(make_args('const_vel'))
        with pytest.raises(ConfigurationError):
            algorithm.save_model('latest_model.npz', str(tmp_path))
