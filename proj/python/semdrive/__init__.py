"""Python bindings for the semdrive simulator, encoder and DQN agent.

Configs are plain dicts in the layout of ``semdrive dump-config``.
"""

import json

from . import _core
from ._core import NUM_ACTIONS, CheckpointError, ConfigError, InputDimMismatch, action_names, velocity_reward

__all__ = [
    "NUM_ACTIONS",
    "CheckpointError",
    "ConfigError",
    "InputDimMismatch",
    "Scene",
    "action_names",
    "default_config",
    "desk_config",
    "epsilon",
    "evaluate",
    "input_dim",
    "q_values",
    "train",
    "validate_config",
    "velocity_reward",
]


def _dump(config):
    return "" if config is None else json.dumps(config)


def default_config():
    return json.loads(_core.default_config_json())


def desk_config():
    return json.loads(_core.desk_config_json())


def validate_config(config):
    """Round-trips a config through the strict loader; raises ConfigError."""
    return json.loads(_core.validate_config_json(_dump(config)))


def input_dim(config=None):
    return _core.input_dim(_dump(config))


def epsilon(step, config=None):
    return _core.epsilon(step, _dump(config))


class Scene(_core.Scene):
    def __init__(self, scenario="highway", seed=0, config=None):
        super().__init__(scenario, seed, _dump(config))


def q_values(checkpoint, state):
    return _core.q_values(str(checkpoint), state)


def train(config):
    """Runs a training job; returns the metrics rows written to metrics.csv."""
    return _core.train(_dump(config))


def evaluate(checkpoint, config=None, scenario="highway", runs=100, theta_v=None, empty=False, seed=7_000_000):
    return json.loads(_core.evaluate_json(str(checkpoint), _dump(config), scenario, runs, theta_v, empty, seed))
