"""DQN with one discrete head per (node, product) on a shared trunk.

Each head picks a point of an evenly spaced grid over ``[0, headroom]``.
Heads are trained independently against the shared reward:
``target_h = z + gamma * max_g Q_h(x', g; target net)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .. import nn
from ..env import Observation, Scenario, SupplyChainEnv
from .common import EpisodeAccumulator, EpisodeStats, action_from_fractions, episode_seed, global_features
from .replay import ReplayBuffer


@dataclass(frozen=True)
class DqnConfig:
    hidden: tuple = (64, 128)
    lr: float = 1e-4
    gamma: float = 0.99
    grid_points: int = 11
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5
    buffer: int = 100_000
    batch: int = 64
    target_sync: int = 500
    reward_scale: float = 1e-3
    optimizer: str = "adam"
    train_every: int = 1

    def __post_init__(self):
        if self.grid_points < 2:
            raise ValueError("grid_points must be >= 2")
        if not (0.0 <= self.eps_end <= self.eps_start <= 1.0):
            raise ValueError("need 0 <= eps_end <= eps_start <= 1")
        if self.target_sync < 1 or self.batch < 1 or self.train_every < 1:
            raise ValueError("target_sync, batch and train_every must be >= 1")


def epsilon_at(step: int, total_steps: int, cfg: DqnConfig) -> float:
    """Linear decay from eps_start to eps_end over the first eps_fraction of steps."""
    span = max(1.0, cfg.eps_fraction * total_steps)
    frac = min(1.0, step / span)
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def td_targets(q_next_target: np.ndarray, z: np.ndarray, done: np.ndarray, gamma: float) -> np.ndarray:
    """Per-head targets ``z + gamma * max Q'`` with the bootstrap dropped at terminals.

    ``q_next_target`` has shape ``(batch, heads, grid)``.
    """
    boot = q_next_target.max(axis=2)
    return z[:, None] + gamma * (~done)[:, None] * boot


class DqnAgent:
    name = "dqn"

    def __init__(self, scenario: Scenario, cfg: DqnConfig | None = None, seed: int = 0, total_steps: int = 10_000):
        self.cfg = cfg or DqnConfig()
        self.scenario = scenario
        self.env = SupplyChainEnv(scenario, seed=seed, stream_id=11)
        self.seed = seed
        obs = self.env.observe()
        self.horizon = scenario.horizon
        self.obs_dim = global_features(obs, self.horizon).size
        self.heads = obs.dc_on_hand.size + obs.retailer_on_hand.size
        G = self.cfg.grid_points
        self.q = nn.init_network([self.obs_dim, *self.cfg.hidden, self.heads * G], "relu", "linear", seed=seed)
        self.q_target = self.q
        self.opt = nn.make_optimizer(self.cfg.optimizer, self.cfg.lr)
        self.buffer = ReplayBuffer(self.cfg.buffer, self.obs_dim, self.heads, act_dtype=np.int64)
        self.rng = np.random.default_rng(episode_seed(seed, 101))
        self.steps = 0
        self.train_steps = 0
        self.total_steps = max(1, int(total_steps))
        self.grid = np.linspace(0.0, 1.0, G)

    # --- acting -------------------------------------------------------------

    def q_values(self, x: np.ndarray, params: nn.MlpParams | None = None) -> np.ndarray:
        out = nn.predict(params or self.q, x)
        return out.reshape(out.shape[0], self.heads, self.cfg.grid_points)

    def select_cells(self, x: np.ndarray, epsilon: float, rng: np.random.Generator) -> np.ndarray:
        greedy = np.argmax(self.q_values(x)[0], axis=1)  # argmax takes the lowest index on ties
        if epsilon <= 0.0:
            return greedy
        explore = rng.random(self.heads) < epsilon
        return np.where(explore, rng.integers(0, self.cfg.grid_points, self.heads), greedy)

    def act(self, obs: Observation, rng: np.random.Generator | None = None, epsilon: float = 0.0):
        cells = self.select_cells(global_features(obs, self.horizon), epsilon, rng or self.rng)
        return action_from_fractions(obs, self.grid[cells])

    def policy(self):
        return lambda obs: self.act(obs, epsilon=0.0)

    @property
    def epsilon(self) -> float:
        return epsilon_at(self.steps, self.total_steps, self.cfg)

    # --- learning -----------------------------------------------------------

    def loss_and_grad(self, batch: dict) -> tuple[float, nn.Gradient]:
        cfg = self.cfg
        B = batch["x"].shape[0]
        q_next = self.q_values(batch["x2"], self.q_target)
        target = td_targets(q_next, batch["z"], batch["done"], cfg.gamma)
        raw, cache = nn.forward(self.q, batch["x"])
        q = raw.reshape(B, self.heads, cfg.grid_points)
        y = batch["y"].astype(np.int64)
        q_sa = np.take_along_axis(q, y[:, :, None], axis=2)[:, :, 0]
        err = q_sa - target
        loss = float(np.mean(err * err))
        up = np.zeros_like(q)
        np.put_along_axis(up, y[:, :, None], (2.0 * err / (B * self.heads))[:, :, None], axis=2)
        return loss, nn.backward(self.q, cache, up.reshape(B, -1))

    def train_step(self, batch: dict) -> float:
        loss, grad = self.loss_and_grad(batch)
        if not math.isfinite(loss) or not grad.is_finite():
            raise FloatingPointError("non-finite DQN loss")
        self.q = self.opt.step(self.q, grad, "descend")
        self.train_steps += 1
        if self.train_steps % self.cfg.target_sync == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.q_target = self.q

    def train_epoch(self, epoch: int) -> EpisodeStats:
        cfg = self.cfg
        obs = self.env.reset(episode_seed(self.seed, 7, epoch))
        x = global_features(obs, self.horizon)
        acc = EpisodeAccumulator()
        done = False
        while not done:
            cells = self.select_cells(x, self.epsilon, self.rng)
            res = self.env.step(action_from_fractions(obs, self.grid[cells]))
            acc.add(res)
            obs, done = res.observation, res.done
            x2 = global_features(obs, self.horizon)
            self.buffer.add(x, cells, res.reward * cfg.reward_scale, x2, done)
            x = x2
            self.steps += 1
            if self.steps % cfg.train_every == 0 and self.buffer.can_sample(cfg.batch):
                self.train_step(self.buffer.sample(cfg.batch, self.rng))
        return acc.stats()

    def networks(self) -> dict:
        return {"q": self.q, "q_target": self.q_target}


def dqn_act(agent: DqnAgent, obs: Observation, rng: np.random.Generator, epsilon: float | None = None):
    return agent.act(obs, rng, agent.epsilon if epsilon is None else epsilon)


def dqn_train_step(agent: DqnAgent, batch: dict) -> float:
    return agent.train_step(batch)


def dqn_target_sync(agent: DqnAgent) -> DqnAgent:
    agent.sync_target()
    return agent
