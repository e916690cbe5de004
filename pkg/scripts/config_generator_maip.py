# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

"""
Create the .yaml for each experiment
"""
import os


def create_configuration(cfg, cfg_file):
    cfg['save_name'] = "{alg}_{seed}".format(
        alg=cfg['algorithm'],
        seed=cfg['seed'],
    )

    alg_file = cfg_file + cfg['algorithm'] + '/'
    if not os.path.exists(alg_file):
        os.makedirs(alg_file)

    print(alg_file + cfg['save_name'] + '.yaml')
    with open(alg_file + cfg['save_name'] + '.yaml', 'w', encoding='utf-8') as w:
        lines = []
        for k, v in cfg.items():
            line = str(k) + ': ' + str(v)
            lines.append(line)
        for line in lines:
            w.writelines(line)
            w.write('\n')


def create_maip_config(alg, seed, episodes=60, epoch=20):
    cfg = {}
    cfg['algorithm'] = alg

    # save config
    cfg['save_dir'] = './saved_models/maip'
    cfg['save_name'] = None
    cfg['load_path'] = None
    cfg['overwrite'] = True
    cfg['use_tensorboard'] = False

    # data config
    cfg['data'] = './data/intersection_{}.jsonl'.format(seed)
    cfg['episodes'] = episodes
    cfg['test_ratio'] = 0.2
    cfg['split_seed'] = 0

    # training config
    cfg['epoch'] = epoch
    cfg['num_train_iter'] = 0
    cfg['num_eval_iter'] = 0
    cfg['batch_size'] = 32
    cfg['eval_batch_size'] = 256
    cfg['eval_samples'] = 1
    cfg['clip_grad'] = 0

    # optim config
    cfg['optim'] = 'adam'
    cfg['lr'] = 3e-3
    cfg['momentum'] = 0.9
    cfg['weight_decay'] = 0.0
    cfg['lr_warm_up'] = 0.03

    # net config
    cfg['th'] = 5
    cfg['tp'] = 5
    cfg['latent_dim'] = 2
    cfg['grid_resolution'] = 2.0
    cfg['map_history'] = 'last'
    cfg['use_mask'] = True

    # method config
    if alg in ('maip', 'cnn_cvae', 'maip_recursive'):
        cfg['beta'] = 0.5
        cfg['beta_warm_up'] = 0.1
    elif alg == 'cnn_lstm':
        cfg['ensemble_size'] = 5

    cfg['n_samples'] = 20
    cfg['seed'] = seed
    return cfg


def exp_maip(seeds):
    config_file = r'./config/maip/'
    algs = ['maip', 'cnn_cvae', 'cnn_lstm', 'maip_recursive', 'idm', 'const_vel']

    for alg in algs:
        for seed in seeds:
            cfg = create_maip_config(alg, seed)
            create_configuration(cfg, config_file)


if __name__ == '__main__':
    if not os.path.exists('./config/maip/'):
        os.makedirs('./config/maip/')

    # seeds = [0, 1, 2]
    exp_maip(seeds=[0])
