"""Map-free multi-agent navigation: simulator, LSTP network, rewards, PPO and evaluation."""

import json

from . import _core
from ._core import ConfigError, Error, LoadError, Network, World, gae, goal_reward, hs_weights, obstacle_reward

__all__ = [
    "ConfigError",
    "Error",
    "LoadError",
    "Network",
    "World",
    "evaluate",
    "gae",
    "generate_world",
    "goal_reward",
    "hs_weights",
    "make_network",
    "normalize_config",
    "obstacle_reward",
    "param_count",
    "train",
]


def _text(config):
    if config is None:
        return "{}"
    return config if isinstance(config, str) else json.dumps(config)


def normalize_config(config=None):
    """Validated config with every default filled in."""
    return json.loads(_core.normalize_config(_text(config)))


def param_count(config=None):
    return _core.param_count(_text(config))


def generate_world(config=None, mode="eval", seed=0):
    return World.generate(_text(config), mode, seed)


def make_network(config=None, seed=0):
    return Network(_text(config), seed)


def evaluate(config, policy, n_trials=10, seed=0, deterministic=True):
    """SR/CR/TR/AS for a policy spec: a checkpoint path, builtin:stationary or builtin:goal-seeker."""
    return _core.evaluate(_text(config), policy, n_trials, seed, deterministic)


def train(config, out_dir=""):
    """Runs training; returns one stats dict per iteration. Writes artifacts when out_dir is set."""
    return _core.train(_text(config), str(out_dir))
