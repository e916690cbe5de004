# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

import numpy as np
import pytest

from maiplab.cli import build_args, get_cli_parser, main
from maiplab.evaluation import MetricTable
from maiplab.nets import read_checkpoint_header

SMALL = ['--episodes', '5', '--n-frames', '30', '--grid-resolution', '10']


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def test_simulate_is_reproducible(tmp_path):
    a, b = str(tmp_path / 'a.jsonl'), str(tmp_path / 'b.jsonl')
    assert main(['simulate', '--seed', '3', '--episodes', '2', '--n-frames', '12', '--out', a]) == 0
    assert main(['simulate', '--seed', '3', '--episodes', '2', '--n-frames', '12', '--out', b]) == 0
    assert open(a, 'rb').read() == open(b, 'rb').read()


def test_flags_override_config_file(tmp_path):
    config = tmp_path / 'run.yaml'
    config.write_text('seed: 5\nepisodes: 2\nmethod: idm\n')
    ns = get_cli_parser().parse_args(['eval', '--config', str(config), '--seed', '7'])
    args = build_args(ns)
    assert args.seed == 7
    assert args.episodes == 2
    assert args.algorithm == 'idm'
    assert args.n_samples == 20


def test_learned_eval_needs_model():
    with pytest.raises(SystemExit) as exc:
        main(['eval', '--method', 'maip'] + SMALL)
    assert exc.value.code == 2


def test_unknown_flag():
    with pytest.raises(SystemExit) as exc:
        main(['eval', '--bogus'])
    assert exc.value.code == 2


def test_missing_data_file():
    assert main(['eval', '--method', 'const_vel', '--data', 'missing.jsonl']) == 1


def test_eval_rule_method(tmp_path):
    out = str(tmp_path / 'rmse.csv')
    assert main(['eval', '--method', 'const_vel', '--baselines', 'idm', '--out', out] + SMALL) == 0
    table = MetricTable.from_csv(out)
    assert table.methods == ['const_vel', 'idm']
    assert table.horizons == pytest.approx([0.2, 0.4, 0.6, 0.8, 1.0])
    assert all(r.std is None for r in table.rows)


def test_sample_dump(tmp_path):
    out = str(tmp_path / 'samples.npz')
    assert main(['sample', '--method', 'const_vel', '--n-samples', '3', '--out', out] + SMALL) == 0
    dump = np.load(out)
    assert dump['pred'].shape[1:] == (3, 5, 2)
    assert dump['pred'].shape[0] == dump['y'].shape[0] == dump['keys'].shape[0]
    assert (dump['modes'] == 1).all()


def test_render_scene(tmp_path):
    out = str(tmp_path / 'scene.svg')
    assert main(['render', '--method', 'const_vel', '--episodes', '1', '--n-frames', '12', '--out', out]) == 0
    assert 'id="junction"' in open(out, encoding='utf-8').read()


def test_gradcheck():
    assert main(['gradcheck', '--grid-resolution', '10', '--max-entries', '3']) == 0


def test_train_then_eval(tmp_path):
    model = str(tmp_path / 'maip.npz')
    assert main(['train', '--method', 'maip', '--epochs', '1', '--out', model] + SMALL) == 0
    header = read_checkpoint_header(model)
    assert header['variant'] == 'maip'
    assert header['grid_size'] == 10
    assert len(header['loss_history']) == 1

    out = str(tmp_path / 'rmse.csv')
    assert main(['eval', '--model', model, '--n-samples', '4', '--out', out] + SMALL) == 0
    table = MetricTable.from_csv(out)
    assert table.methods == ['maip']
    assert table.get('maip', 1.0, 'v').std is not None
