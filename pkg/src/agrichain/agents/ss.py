"""Periodic-review (s, S) policy and its grid tuner."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..env import Action, Observation, SupplyChainEnv
from .common import EpisodeStats, episode_seed, run_episode


@dataclass(frozen=True)
class SsConfig:
    s_grid: tuple = (0.0, 0.1, 0.2, 0.3, 0.4)
    S_grid: tuple = (0.2, 0.4, 0.6, 0.8, 1.0)
    relative: bool = True        # grids are fractions of each node's capacity
    episodes: int = 10
    nodes: tuple | None = None   # e.g. (("retailer", 0, 2),); None tunes every (node, product)
    sweeps: int = 1

    def __post_init__(self):
        if not self.s_grid or not self.S_grid:
            raise ValueError("s_grid and S_grid must be nonempty")
        if self.episodes < 1 or self.sweeps < 1:
            raise ValueError("episodes and sweeps must be >= 1")


def ss_decide(s: float, S: float, inventory_position: float) -> float:
    """Order up to S when the inventory position is strictly below s."""
    return S - inventory_position if inventory_position < s else 0.0


class SSPolicy:
    """Per (node, product) reorder points and order-up-to levels, in units."""

    name = "ss"

    def __init__(self, dc_s, dc_S, retailer_s, retailer_S, dc_capacity=None, retailer_capacity=None):
        self.dc_s, self.dc_S = np.array(dc_s, dtype=float), np.array(dc_S, dtype=float)
        self.retailer_s, self.retailer_S = np.array(retailer_s, dtype=float), np.array(retailer_S, dtype=float)
        for lo, hi, cap, who in ((self.dc_s, self.dc_S, dc_capacity, "dc"),
                                 (self.retailer_s, self.retailer_S, retailer_capacity, "retailer")):
            if lo.shape != hi.shape:
                raise ValueError(f"{who}: s and S shapes differ")
            if np.any(lo < 0) or np.any(lo > hi):
                raise ValueError(f"{who}: need 0 <= s <= S")
            if cap is not None and np.any(hi > np.asarray(cap) + 1e-9):
                raise ValueError(f"{who}: S above capacity")

    @classmethod
    def zeros(cls, n_dcs: int, n_retailers: int, n_products: int) -> "SSPolicy":
        z = np.zeros
        return cls(z((n_dcs, n_products)), z((n_dcs, n_products)),
                   z((n_retailers, n_products)), z((n_retailers, n_products)))

    def copy(self) -> "SSPolicy":
        return SSPolicy(self.dc_s, self.dc_S, self.retailer_s, self.retailer_S)

    def get(self, key) -> tuple[float, float]:
        kind, i, p = key
        if kind == "dc":
            return float(self.dc_s[i, p]), float(self.dc_S[i, p])
        return float(self.retailer_s[i, p]), float(self.retailer_S[i, p])

    def set(self, key, s: float, S: float) -> None:
        kind, i, p = key
        if kind == "dc":
            self.dc_s[i, p], self.dc_S[i, p] = s, S
        else:
            self.retailer_s[i, p], self.retailer_S[i, p] = s, S

    def __call__(self, obs: Observation) -> Action:
        dc_ip = obs.dc_on_hand + obs.dc_pipeline
        r_ip = obs.retailer_on_hand + obs.retailer_pipeline
        dco = np.where(dc_ip < self.dc_s, self.dc_S - dc_ip, 0.0)
        rto = np.where(r_ip < self.retailer_s, self.retailer_S - r_ip, 0.0)
        return Action(np.maximum(dco, 0.0), np.maximum(rto, 0.0))

    def to_dict(self) -> dict:
        return {"dc_s": self.dc_s.tolist(), "dc_S": self.dc_S.tolist(),
                "retailer_s": self.retailer_s.tolist(), "retailer_S": self.retailer_S.tolist()}


def controlled_keys(env: SupplyChainEnv) -> list[tuple]:
    return ([("dc", k, p) for k in range(env.K) for p in range(env.P)]
            + [("retailer", c, p) for c in range(env.C) for p in range(env.P)])


def _capacity(env: SupplyChainEnv, key) -> float:
    kind, i, p = key
    return float(env.dc_cap[i, p] if kind == "dc" else env.ret_cap[i, p])


def _candidates(s_grid, S_grid, scale: float) -> list[tuple[float, float]]:
    pairs = {(float(s) * scale, float(S) * scale) for s, S in itertools.product(s_grid, S_grid) if s <= S}
    # tie rule: smaller S first, then smaller s; a later pair must be strictly better
    return sorted(pairs, key=lambda x: (x[1], x[0]))


def mean_profit(env: SupplyChainEnv, policy, episodes: int, seed: int) -> float:
    """Mean episode profit over common episode seeds."""
    return EpisodeStats.mean([run_episode(env, policy, episode_seed(seed, 77, e))
                              for e in range(episodes)]).reward


def ss_grid_tune(env: SupplyChainEnv, s_grid: Sequence[float], S_grid: Sequence[float], episodes: int = 10,
                 seed: int = 0, nodes: Sequence[tuple] | None = None, base: SSPolicy | None = None,
                 relative: bool = False, sweeps: int = 1) -> SSPolicy:
    """Grid search over (s, S) maximizing mean episode profit.

    A single tuned (node, product) is searched exhaustively; with several,
    each one is searched in turn with the others held fixed (``sweeps``
    rounds).  Every candidate is scored on the same episode seeds.
    """
    if not len(s_grid) or not len(S_grid):
        raise ValueError("grids must be nonempty")
    keys = list(nodes) if nodes is not None else controlled_keys(env)
    policy = base.copy() if base is not None else SSPolicy.zeros(env.K, env.C, env.P)
    for _ in range(sweeps):
        for key in keys:
            scale = _capacity(env, key) if relative else 1.0
            cands = _candidates(s_grid, S_grid, scale)
            if not cands:
                raise ValueError("no candidate pair with s <= S")
            best, best_val = None, -np.inf
            for s, S in cands:
                policy.set(key, s, S)
                val = mean_profit(env, policy, episodes, seed)
                if val > best_val:
                    best, best_val = (s, S), val
            policy.set(key, *best)
    return policy
