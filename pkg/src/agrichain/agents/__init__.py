"""Policies and learners: baselines plus the per-algorithm hyperparameter registry."""

from __future__ import annotations

from .common import (EpisodeAccumulator, EpisodeStats, RandomPolicy, evaluate, episode_seed, global_features,
                     run_episode)
from .dqn import DqnAgent, DqnConfig, dqn_act, dqn_target_sync, dqn_train_step
from .ppo import PpoCentralAgent, PpoConfig, ppo_central_update
from .replay import ReplayBuffer
from .sac import SacAgent, SacConfig, sac_act, sac_train_step
from .ss import SSPolicy, SsConfig, ss_grid_tune


def hyperparameter_class(algo: str):
    """Dataclass holding an algorithm's hyperparameters; ``None`` for the random policy."""
    if algo == "a3c_dppo":
        from ..a3c_dppo import A3cConfig
        return A3cConfig
    table = {"ss": SsConfig, "dqn": DqnConfig, "sac": SacConfig, "ppo_central": PpoConfig, "random": None}
    if algo not in table:
        raise KeyError(f"unknown algorithm {algo!r}")
    return table[algo]


__all__ = [
    "DqnAgent", "DqnConfig", "EpisodeAccumulator", "EpisodeStats", "PpoCentralAgent", "PpoConfig", "RandomPolicy",
    "ReplayBuffer", "SSPolicy", "SacAgent", "SacConfig", "SsConfig", "dqn_act", "dqn_target_sync", "dqn_train_step",
    "episode_seed", "evaluate", "global_features", "hyperparameter_class", "ppo_central_update", "run_episode",
    "sac_act", "sac_train_step", "ss_grid_tune",
]
