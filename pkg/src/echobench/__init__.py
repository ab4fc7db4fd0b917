"""Reservoir memory versus trainable recurrence for POMDP reinforcement
learning, under one actor-critic trainer and a seeded experiment harness."""

from .agent import Agent, AgentConfig, train_meta_episode
from .cells import CellConfig, MlpConfig
from .envs import make_env, task_config
from .harness import ExperimentConfig, run_experiment
from .reservoir import EsnConfig, build_reservoir
from .rng import Xoshiro256pp

__all__ = [
    "Agent",
    "AgentConfig",
    "CellConfig",
    "EsnConfig",
    "ExperimentConfig",
    "MlpConfig",
    "Xoshiro256pp",
    "build_reservoir",
    "make_env",
    "run_experiment",
    "task_config",
    "train_meta_episode",
]

__version__ = "0.1.0"
