# Copyright (c) Microsoft Corporation.
# Licensed under the MIT License.

from sklearn.model_selection import train_test_split


def split_episodes(episodes, test_ratio=0.2, seed=0):
    """
    Held-out split by episode, so no test window shares frames with a training
    window. At least one episode lands on each side when there are two or more.

    Returns:
        (train_episodes, test_episodes)
    """
    episodes = list(episodes)
    if len(episodes) < 2 or test_ratio <= 0:
        return episodes, []
    n_test = min(max(int(round(test_ratio * len(episodes))), 1), len(episodes) - 1)
    train, test = train_test_split(episodes, test_size=n_test, random_state=seed, shuffle=True)
    return sorted(train, key=lambda e: e.ep), sorted(test, key=lambda e: e.ep)
