"""Soft actor-critic with a state-value network and twin Q critics.

Actions are fractions of headroom, ``a = (tanh(u) + 1) / 2``.  Critics see
``[features, a]``.  The log-density carries the tanh correction
``- sum log(1 - tanh(u)^2)``; the constant from the affine map is dropped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import nn
from ..env import Observation, Scenario, SupplyChainEnv
from .common import EpisodeAccumulator, EpisodeStats, action_from_fractions, episode_seed, global_features, \
    squash_fraction
from .replay import ReplayBuffer


@dataclass(frozen=True)
class SacConfig:
    hidden: tuple = (64, 128)
    actor_lr: float = 5e-5
    critic_lr: float = 1e-4
    gamma: float = 0.99
    temperature: float = 0.2
    buffer: int = 100_000
    batch: int = 64
    twin_min: bool = True     # False: value target uses the first critic only
    reward_scale: float = 1e-3
    optimizer: str = "adam"
    train_every: int = 1

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.batch < 1 or self.train_every < 1:
            raise ValueError("batch and train_every must be >= 1")


def squashed_log_prob(mean, log_std, u) -> np.ndarray:
    return nn.gaussian_log_density(mean, log_std, u) - nn.squash_log_correction(u)


class SacAgent:
    name = "sac"

    def __init__(self, scenario: Scenario, cfg: SacConfig | None = None, seed: int = 0):
        self.cfg = cfg or SacConfig()
        self.env = SupplyChainEnv(scenario, seed=seed, stream_id=17)
        self.seed = seed
        self.horizon = scenario.horizon
        obs = self.env.observe()
        D = global_features(obs, self.horizon).size
        A = obs.dc_on_hand.size + obs.retailer_on_hand.size
        self.obs_dim, self.act_dim = D, A
        h = self.cfg.hidden
        self.actor = nn.init_network([D, *h, A], "tanh", "gaussian", seed=seed)
        self.q1 = nn.init_network([D + A, *h, 1], "relu", "linear", seed=seed + 1)
        self.q2 = nn.init_network([D + A, *h, 1], "relu", "linear", seed=seed + 2)
        self.value = nn.init_network([D, *h, 1], "relu", "linear", seed=seed + 3)
        opt = self.cfg.optimizer
        self.actor_opt = nn.make_optimizer(opt, self.cfg.actor_lr)
        self.q1_opt = nn.make_optimizer(opt, self.cfg.critic_lr)
        self.q2_opt = nn.make_optimizer(opt, self.cfg.critic_lr)
        self.value_opt = nn.make_optimizer(opt, self.cfg.critic_lr)
        self.buffer = ReplayBuffer(self.cfg.buffer, D, A)
        self.rng = np.random.default_rng(episode_seed(seed, 171))
        self.steps = 0

    # --- acting -------------------------------------------------------------

    def act(self, obs: Observation, rng=None, deterministic: bool = False):
        return action_from_fractions(obs, self.fraction(global_features(obs, self.horizon), rng, deterministic))

    def fraction(self, x, rng=None, deterministic=False) -> np.ndarray:
        if deterministic:
            mean, _, _ = nn.split_gaussian(nn.predict(self.actor, x))
            return squash_fraction(mean[0])
        u, _ = nn.gaussian_head_sample(self.actor, x, rng or self.rng)
        return squash_fraction(u[0])

    def policy(self):
        return lambda obs: self.act(obs, deterministic=True)

    # --- losses -------------------------------------------------------------

    def _q_min(self, x, a) -> np.ndarray:
        xa = np.concatenate([x, a], axis=1)
        q1 = nn.predict(self.q1, xa)[:, 0]
        if not self.cfg.twin_min:
            return q1
        return np.minimum(q1, nn.predict(self.q2, xa)[:, 0])

    def _q_min_action_grad(self, x, a):
        """min(Q1, Q2) at (x, a) and its gradient w.r.t. a."""
        xa = np.concatenate([x, a], axis=1)
        B = x.shape[0]
        q1, c1 = nn.forward(self.q1, xa)
        _, gx1 = nn.backward(self.q1, c1, np.ones((B, 1)), return_input_grad=True)
        if not self.cfg.twin_min:
            return q1[:, 0], gx1[:, self.obs_dim:]
        q2, c2 = nn.forward(self.q2, xa)
        _, gx2 = nn.backward(self.q2, c2, np.ones((B, 1)), return_input_grad=True)
        pick1 = (q1[:, 0] <= q2[:, 0])[:, None]
        return np.where(pick1[:, 0], q1[:, 0], q2[:, 0]), np.where(pick1, gx1, gx2)[:, self.obs_dim:]

    def policy_loss_and_grad(self, x, noise) -> tuple[float, nn.Gradient]:
        """J_pi = mean(temperature * log pi(a|x) - minQ(x, a)), reparameterized with fixed noise."""
        delta = self.cfg.temperature
        B = x.shape[0]
        raw, cache = nn.forward(self.actor, x)
        mean, log_std, live = nn.split_gaussian(raw)
        std = np.exp(log_std)
        u = mean + std * noise
        t = np.tanh(u)
        a = 0.5 * (t + 1.0)
        logp = squashed_log_prob(mean, log_std, u)
        q, ga = self._q_min_action_grad(x, a)
        loss = float(np.mean(delta * logp - q))
        dq_du = ga * 0.5 * (1.0 - t * t)
        d_mean = delta * 2.0 * t - dq_du
        d_log_std = (delta * (-1.0 + 2.0 * t * std * noise) - dq_du * std * noise) * live
        up = np.concatenate([d_mean, d_log_std], axis=1) / B
        return loss, nn.backward(self.actor, cache, up)

    def value_loss_and_grad(self, x, noise):
        delta = self.cfg.temperature
        B = x.shape[0]
        mean, log_std, _ = nn.split_gaussian(nn.predict(self.actor, x))
        u = mean + np.exp(log_std) * noise
        a = squash_fraction(u)
        q = self._q_min(x, a)
        target = q - delta * squashed_log_prob(mean, log_std, u)
        v, cache = nn.forward(self.value, x)
        err = v[:, 0] - target
        return float(np.mean(err * err)), nn.backward(self.value, cache, (2.0 * err / B)[:, None])

    def critic_loss_and_grads(self, batch):
        cfg = self.cfg
        B = batch["x"].shape[0]
        v_next = nn.predict(self.value, batch["x2"])[:, 0]
        target = batch["z"] + cfg.gamma * (~batch["done"]) * v_next
        xa = np.concatenate([batch["x"], batch["y"]], axis=1)
        out = []
        for net in (self.q1, self.q2):
            q, cache = nn.forward(net, xa)
            err = q[:, 0] - target
            out.append((float(np.mean(err * err)), nn.backward(net, cache, (2.0 * err / B)[:, None])))
        return out

    def train_step(self, batch: dict) -> tuple[float, float]:
        (l1, g1), (l2, g2) = self.critic_loss_and_grads(batch)
        noise = self.rng.standard_normal((batch["x"].shape[0], self.act_dim))
        lv, gv = self.value_loss_and_grad(batch["x"], noise)
        lp, gp = self.policy_loss_and_grad(batch["x"], noise)
        if not all(math.isfinite(v) for v in (l1, l2, lv, lp)):
            raise FloatingPointError("non-finite SAC loss")
        self.q1 = self.q1_opt.step(self.q1, g1, "descend")
        self.q2 = self.q2_opt.step(self.q2, g2, "descend")
        self.value = self.value_opt.step(self.value, gv, "descend")
        self.actor = self.actor_opt.step(self.actor, gp, "descend")
        return lv, lp

    def train_epoch(self, epoch: int) -> EpisodeStats:
        cfg = self.cfg
        obs = self.env.reset(episode_seed(self.seed, 8, epoch))
        x = global_features(obs, self.horizon)
        acc = EpisodeAccumulator()
        done = False
        while not done:
            frac = self.fraction(x)
            res = self.env.step(action_from_fractions(obs, frac))
            acc.add(res)
            obs, done = res.observation, res.done
            x2 = global_features(obs, self.horizon)
            self.buffer.add(x, frac, res.reward * cfg.reward_scale, x2, done)
            x = x2
            self.steps += 1
            if self.steps % cfg.train_every == 0 and self.buffer.can_sample(cfg.batch):
                self.train_step(self.buffer.sample(cfg.batch, self.rng))
        return acc.stats()

    def networks(self) -> dict:
        return {"actor": self.actor, "q1": self.q1, "q2": self.q2, "value": self.value}


def sac_act(agent: SacAgent, obs: Observation, rng=None, deterministic: bool = False):
    return agent.act(obs, rng, deterministic)


def sac_train_step(agent: SacAgent, batch: dict) -> tuple[float, float]:
    return agent.train_step(batch)
