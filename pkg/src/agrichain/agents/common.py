"""Pieces shared by every policy: episode loop, feature vectors, action maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..env import Action, CostBreakdown, Observation, StepResult, SupplyChainEnv

Policy = Callable[[Observation], Action]


def episode_seed(base: int, *keys: int) -> int:
    """Deterministic 63-bit seed derived from a base seed and integer keys."""
    ss = np.random.SeedSequence([int(base) & 0xFFFFFFFF, *(int(k) for k in keys)])
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class EpisodeStats:
    reward: float
    costs: CostBreakdown
    fill_rate: float
    wasted_units: float
    steps: int

    @staticmethod
    def mean(stats: Sequence["EpisodeStats"]) -> "EpisodeStats":
        n = len(stats)
        if n == 0:
            raise ValueError("no episodes to average")
        tot = CostBreakdown()
        for s in stats:
            tot = tot + s.costs
        avg = CostBreakdown(tot.purchasing / n, tot.holding / n, tot.wastage / n, tot.shortage / n,
                            tot.transport / n)
        return EpisodeStats(sum(s.reward for s in stats) / n, avg, sum(s.fill_rate for s in stats) / n,
                            sum(s.wasted_units for s in stats) / n, int(round(sum(s.steps for s in stats) / n)))


class EpisodeAccumulator:
    """Running totals over the steps of one episode."""

    def __init__(self):
        self.reward = 0.0
        self.costs = CostBreakdown()
        self.demand = 0.0
        self.sold = 0.0
        self.wasted = 0.0
        self.steps = 0

    def add(self, res: StepResult) -> None:
        self.reward += res.reward
        self.costs = self.costs + res.costs
        self.demand += float(res.retailers.demand.sum())
        self.sold += float(res.retailers.sold.sum())
        self.wasted += res.wasted_units
        self.steps += 1

    def stats(self) -> EpisodeStats:
        fill = 1.0 if self.demand <= 0 else self.sold / self.demand
        return EpisodeStats(self.reward, self.costs, fill, self.wasted, self.steps)


def run_episode(env: SupplyChainEnv, policy: Policy, seed: int) -> EpisodeStats:
    obs = env.reset(seed)
    acc = EpisodeAccumulator()
    done = False
    while not done:
        res = env.step(policy(obs))
        acc.add(res)
        obs, done = res.observation, res.done
    return acc.stats()


def evaluate(env: SupplyChainEnv, policy: Policy, episodes: int, seed: int) -> EpisodeStats:
    return EpisodeStats.mean([run_episode(env, policy, episode_seed(seed, 1_000_003, e)) for e in range(episodes)])


# --- action maps ------------------------------------------------------------

def squash_fraction(u: np.ndarray) -> np.ndarray:
    """Pre-squash action to a fraction of headroom, (tanh(u) + 1) / 2."""
    return 0.5 * (np.tanh(u) + 1.0)


def headroom_vector(obs: Observation) -> np.ndarray:
    """Capacity headroom of every controlled (node, product): DCs first, then retailers."""
    return np.concatenate([obs.dc_headroom().ravel(), obs.retailer_headroom().ravel()])


def action_from_vector(obs: Observation, units: np.ndarray) -> Action:
    K, P = obs.dc_on_hand.shape
    units = np.asarray(units, dtype=float)
    return Action(units[:K * P].reshape(K, P).copy(), units[K * P:].reshape(-1, P).copy())


def action_from_fractions(obs: Observation, frac: np.ndarray) -> Action:
    return action_from_vector(obs, np.clip(frac, 0.0, 1.0) * headroom_vector(obs))


def n_controls(obs: Observation) -> int:
    return obs.dc_on_hand.size + obs.retailer_on_hand.size


# --- features ---------------------------------------------------------------

def global_features(obs: Observation, horizon: int) -> np.ndarray:
    """Network-wide state vector plus the elapsed fraction of the episode."""
    return np.append(obs.features(), obs.t / horizon)


def retailer_features(obs: Observation, c: int, dc: int, horizon: int) -> np.ndarray:
    cap = obs.retailer_capacity[c]
    return np.concatenate([
        obs.retailer_on_hand[c] / cap, obs.retailer_pipeline[c] / cap, [obs.retailer_lead_forecast[c] / 10.0],
        obs.retailer_demand_forecast[c] / cap, obs.dc_on_hand[dc] / obs.dc_capacity[dc], obs.day_one_hot,
        [obs.t / horizon]])


def dc_features(obs: Observation, k: int, retailers: Sequence[int], horizon: int) -> np.ndarray:
    cap = obs.dc_capacity[k]
    rs = list(retailers)
    down_fc = obs.retailer_demand_forecast[rs].sum(axis=0) if rs else np.zeros_like(cap)
    down_oh = obs.retailer_on_hand[rs].sum(axis=0) if rs else np.zeros_like(cap)
    return np.concatenate([
        obs.dc_on_hand[k] / cap, obs.dc_pipeline[k] / cap, [obs.dc_lead_forecast[k] / 10.0],
        down_fc / cap, down_oh / cap, obs.day_one_hot, [obs.t / horizon]])


def retailer_feature_dim(n_products: int) -> int:
    return 4 * n_products + 1 + 7 + 1


def dc_feature_dim(n_products: int) -> int:
    return 4 * n_products + 1 + 7 + 1


# --- random policy ----------------------------------------------------------

class RandomPolicy:
    """Orders a uniform random fraction of each node's headroom."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def __call__(self, obs: Observation) -> Action:
        return action_from_fractions(obs, self.rng.random(n_controls(obs)))
