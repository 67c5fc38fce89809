"""Clipped-surrogate policy updates and the centralized PPO baseline."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..env import Observation, Scenario, SupplyChainEnv
from .common import (EpisodeAccumulator, EpisodeStats, action_from_fractions, episode_seed, global_features,
                     squash_fraction)


def clip_ratio(ratio, clip: float):
    return np.clip(ratio, 1.0 - clip, 1.0 + clip)


def surrogate(ratio: np.ndarray, adv: np.ndarray, clip: float) -> np.ndarray:
    """Per-transition ``min(ratio * A, clip(ratio) * A)``."""
    return np.minimum(ratio * adv, clip_ratio(ratio, clip) * adv)


def surrogate_coefficients(ratio: np.ndarray, adv: np.ndarray, clip: float) -> np.ndarray:
    """d surrogate / d log pi per transition.

    Where the clipped branch is the active minimum and the ratio sits outside
    ``[1 - clip, 1 + clip]`` the surrogate is flat and the coefficient is 0.
    """
    clipped = ((adv >= 0) & (ratio > 1.0 + clip)) | ((adv < 0) & (ratio < 1.0 - clip))
    return np.where(clipped, 0.0, ratio * adv)


def surrogate_gradient(actor: nn.MlpParams, x, u, logp_old, adv, weights, clip: float):
    """Gradient of ``sum_i weights_i * surrogate_i`` (ascent direction)."""
    logp, _ = nn.gaussian_log_prob(actor, x, u)
    ratio = np.exp(logp - logp_old)
    coef = surrogate_coefficients(ratio, adv, clip) * weights
    _, grad = nn.gaussian_log_prob_grad(actor, x, u, coef)
    return grad, ratio


def value_regression_gradient(critic: nn.MlpParams, x, target, weights):
    """Gradient of ``sum_i weights_i * (V(x_i) - target_i)^2`` (descent direction)."""
    v, cache = nn.forward(critic, x)
    err = v[:, 0] - target
    return nn.backward(critic, cache, (2.0 * err * weights)[:, None]), float(np.sum(weights * err * err))


def discounted_returns(rewards: np.ndarray, done: np.ndarray, gamma: float, bootstrap: float = 0.0) -> np.ndarray:
    out = np.zeros_like(rewards, dtype=float)
    g = bootstrap
    for i in reversed(range(len(rewards))):
        if done[i]:
            g = 0.0
        g = rewards[i] + gamma * g
        out[i] = g
    return out


@dataclass(frozen=True)
class PpoConfig:
    hidden: tuple = (64, 128)
    actor_lr: float = 5e-5
    critic_lr: float = 1e-4
    clip: float = 0.2
    gamma: float = 0.99
    ppo_epochs: int = 4
    minibatch: int = 64
    episodes_per_epoch: int = 1
    reward_scale: float = 1e-3
    optimizer: str = "adam"
    normalize_advantages: bool = True

    def __post_init__(self):
        if self.clip <= 0:
            raise ValueError("clip must be > 0")
        if self.ppo_epochs < 1 or self.minibatch < 1 or self.episodes_per_epoch < 1:
            raise ValueError("ppo_epochs, minibatch and episodes_per_epoch must be >= 1")


@dataclass
class Rollout:
    x: list = field(default_factory=list)
    u: list = field(default_factory=list)
    logp: list = field(default_factory=list)
    r: list = field(default_factory=list)
    done: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.r)


class PpoCentralAgent:
    """One actor and one critic over the whole network's state and action."""

    name = "ppo_central"

    def __init__(self, scenario: Scenario, cfg: PpoConfig | None = None, seed: int = 0):
        self.cfg = cfg or PpoConfig()
        self.env = SupplyChainEnv(scenario, seed=seed, stream_id=13)
        self.seed = seed
        self.horizon = scenario.horizon
        obs = self.env.observe()
        D = global_features(obs, self.horizon).size
        A = obs.dc_on_hand.size + obs.retailer_on_hand.size
        self.actor = nn.init_network([D, *self.cfg.hidden, A], "tanh", "gaussian", seed=seed)
        self.critic = nn.init_network([D, *self.cfg.hidden, 1], "relu", "linear", seed=seed + 1)
        self.actor_old = self.actor
        self.actor_opt = nn.make_optimizer(self.cfg.optimizer, self.cfg.actor_lr)
        self.critic_opt = nn.make_optimizer(self.cfg.optimizer, self.cfg.critic_lr)
        self.rng = np.random.default_rng(episode_seed(seed, 131))

    def act(self, obs: Observation, rng=None, deterministic: bool = False):
        x = global_features(obs, self.horizon)
        if deterministic:
            mean, _, _ = nn.split_gaussian(nn.predict(self.actor, x))
            return action_from_fractions(obs, squash_fraction(mean[0]))
        u, _ = nn.gaussian_head_sample(self.actor, x, rng or self.rng)
        return action_from_fractions(obs, squash_fraction(u[0]))

    def policy(self):
        return lambda obs: self.act(obs, deterministic=True)

    def collect(self, epoch: int) -> tuple[Rollout, list[EpisodeStats]]:
        ro, stats = Rollout(), []
        for e in range(self.cfg.episodes_per_epoch):
            obs = self.env.reset(episode_seed(self.seed, 9, epoch, e))
            acc = EpisodeAccumulator()
            done = False
            while not done:
                x = global_features(obs, self.horizon)
                u, logp = nn.gaussian_head_sample(self.actor_old, x, self.rng)
                res = self.env.step(action_from_fractions(obs, squash_fraction(u[0])))
                acc.add(res)
                ro.x.append(x)
                ro.u.append(u[0])
                ro.logp.append(float(logp[0]))
                ro.r.append(res.reward * self.cfg.reward_scale)
                ro.done.append(res.done)
                obs, done = res.observation, res.done
            stats.append(acc.stats())
        return ro, stats

    def train_epoch(self, epoch: int) -> EpisodeStats:
        ro, stats = self.collect(epoch)
        ppo_central_update(self, ro)
        return EpisodeStats.mean(stats)

    def networks(self) -> dict:
        return {"actor": self.actor, "critic": self.critic}


def ppo_central_update(agent: PpoCentralAgent, rollout: Rollout) -> dict:
    if len(rollout) == 0:
        raise ValueError("empty rollout")
    cfg = agent.cfg
    x = np.asarray(rollout.x)
    u = np.asarray(rollout.u)
    logp_old = np.asarray(rollout.logp)
    returns = discounted_returns(np.asarray(rollout.r), np.asarray(rollout.done), cfg.gamma)
    adv = returns - nn.predict(agent.critic, x)[:, 0]
    if cfg.normalize_advantages and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    n = len(adv)
    clipped = 0
    for _ in range(cfg.ppo_epochs):
        order = agent.rng.permutation(n)
        for start in range(0, n, cfg.minibatch):
            idx = order[start:start + cfg.minibatch]
            w = np.full(len(idx), 1.0 / len(idx))
            g, ratio = surrogate_gradient(agent.actor, x[idx], u[idx], logp_old[idx], adv[idx], w, cfg.clip)
            clipped += int(np.sum(np.abs(ratio - 1.0) > cfg.clip))
            gc, _ = value_regression_gradient(agent.critic, x[idx], returns[idx], w)
            if not (g.is_finite() and gc.is_finite()):
                raise FloatingPointError("non-finite PPO gradient")
            agent.actor = agent.actor_opt.step(agent.actor, g, "ascend")
            agent.critic = agent.critic_opt.step(agent.critic, gc, "descend")
    agent.actor_old = agent.actor
    return {"transitions": n, "clipped": clipped, "mean_return": float(returns.mean())}
