"""Cooperative A3C-DPPO trainer.

Every retailer is a local actor-critic worker attached to its distribution
center's coordinator (tier 1); every DC is a worker attached to its farm's
coordinator (tier 2).  One epoch:

1. zero the coordinators' accumulators;
2. each worker plays an episode on its own environment replica (all nodes
   act with the broadcast parameters, the worker records only its own
   transitions) and computes its local actor/critic gradients;
3. each coordinator weighs the workers (recency and reward share),
   aggregates, takes the aggregate step, then refines with clipped-surrogate
   passes over the union of trajectories, every parameter step blended
   with an exponential moving average;
4. the new parameters are broadcast back to the workers.
"""

from __future__ import annotations

import logging
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import nn
from .agents.common import (EpisodeAccumulator, EpisodeStats, dc_feature_dim, dc_features, episode_seed,
                            retailer_feature_dim, retailer_features, squash_fraction)
from .agents.ppo import surrogate_coefficients
from .env import Action, Observation, Scenario, StepResult, SupplyChainEnv

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class A3cConfig:
    hidden: tuple = (64, 128)
    actor_lr: float = 5e-5
    critic_lr: float = 1e-4
    clip: float = 0.2
    gamma: float = 0.99
    tau: float = 0.1
    mu1: float = 0.5
    mu2: float = 0.5
    rho: float = 0.1
    reward_smoothing: float = 0.1   # EMA factor of each worker's running mean reward
    ppo_epochs: int = 4             # the first pass is the aggregated step
    minibatch: int = 64
    episodes_per_epoch: int = 1
    reward_scale: float = 1e-3
    optimizer: str = "adam"
    retailer_reward: str = "own"    # own | chain
    dc_reward: str = "chain"        # own | chain
    tier2: bool = True              # False: DCs never order

    def __post_init__(self):
        if not (0.0 < self.tau <= 1.0):
            raise ValueError("tau must lie in (0, 1]")
        if self.clip <= 0:
            raise ValueError("clip must be > 0")
        if self.ppo_epochs < 1 or self.minibatch < 1 or self.episodes_per_epoch < 1:
            raise ValueError("ppo_epochs, minibatch and episodes_per_epoch must be >= 1")
        if self.retailer_reward not in ("own", "chain") or self.dc_reward not in ("own", "chain"):
            raise ValueError("reward sources must be own or chain")
        if min(self.mu1, self.mu2, self.rho) < 0:
            raise ValueError("mu1, mu2 and rho must be >= 0")


@dataclass
class Trajectory:
    u: list = field(default_factory=list)       # local observation features
    v: list = field(default_factory=list)       # pre-squash action
    r: list = field(default_factory=list)       # scaled local reward
    u2: list = field(default_factory=list)
    logp: list = field(default_factory=list)    # log-density under the collecting parameters
    done: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.r)

    def append(self, u, v, r, u2, logp, done) -> None:
        self.u.append(u)
        self.v.append(v)
        self.r.append(r)
        self.u2.append(u2)
        self.logp.append(logp)
        self.done.append(done)

    def arrays(self) -> dict:
        if not len(self):
            raise ValueError("empty trajectory")
        return {"u": np.asarray(self.u), "v": np.asarray(self.v), "r": np.asarray(self.r, dtype=float),
                "u2": np.asarray(self.u2), "logp": np.asarray(self.logp, dtype=float),
                "done": np.asarray(self.done, dtype=bool)}


class LocalAgent:
    """A worker: its own network copies, environment replica and random stream."""

    def __init__(self, agent_id: int, role: str, node: int, actor: nn.MlpParams, critic: nn.MlpParams,
                 env: SupplyChainEnv, seed: int, gamma: float = 0.99):
        self.id = agent_id
        self.role = role            # "retailer" or "dc"
        self.node = node
        self.actor = actor
        self.critic = critic
        self.env = env
        self.seed = seed
        self.gamma = gamma
        self.rng = np.random.default_rng(episode_seed(seed, 5, agent_id))
        self.t_k: int | None = None
        self.rbar = 0.0
        self.rbar_init = False
        self.obs: Observation | None = None
        self.episodes = 0
        self.acc = EpisodeAccumulator()
        self.finished: list[EpisodeStats] = []
        self.peers: Callable | None = None      # obs, rng -> Action for every node
        self.features: Callable | None = None   # obs -> own feature vector
        self.reward_of: Callable | None = None  # StepResult -> own raw reward
        self.reward_scale = 1.0

    def set_action(self, action: Action, obs: Observation, u: np.ndarray) -> Action:
        frac = squash_fraction(u)
        if self.role == "retailer":
            ret = action.retailer_orders.copy()
            ret[self.node] = frac * obs.retailer_headroom()[self.node]
            return Action(action.dc_orders, ret)
        dc = action.dc_orders.copy()
        dc[self.node] = frac * obs.dc_headroom()[self.node]
        return Action(dc, action.retailer_orders)


def local_collect(agent: LocalAgent, n_steps: int) -> Trajectory:
    """Play ``n_steps`` on the agent's replica; the episode carries over between calls."""
    if agent.t_k is None:
        raise RuntimeError("agent has never been synced with its coordinator")
    traj = Trajectory()
    for _ in range(n_steps):
        if agent.obs is None:
            agent.obs = agent.env.reset(episode_seed(agent.seed, 6, agent.id, agent.episodes))
            agent.acc = EpisodeAccumulator()
        obs = agent.obs
        x = agent.features(obs)
        u, logp = nn.gaussian_head_sample(agent.actor, x, agent.rng)
        action = agent.set_action(agent.peers(obs, agent.rng), obs, u[0])
        res = agent.env.step(action)
        agent.acc.add(res)
        traj.append(x, u[0], agent.reward_of(res) * agent.reward_scale, agent.features(res.observation),
                    float(logp[0]), res.done)
        if res.done:
            agent.finished.append(agent.acc.stats())
            agent.episodes += 1
            agent.obs = None
        else:
            agent.obs = res.observation
    return traj


def advantage(agent: LocalAgent, transition: tuple) -> float:
    """One-step advantage ``r + gamma * G(u') - G(u)``; no bootstrap at terminals."""
    u, _v, r, u2, _logp, done = transition
    g_u = float(nn.predict(agent.critic, u)[0, 0])
    g_u2 = 0.0 if done else float(nn.predict(agent.critic, u2)[0, 0])
    return r + agent.gamma * g_u2 - g_u


def td_errors(critic: nn.MlpParams, data: dict, gamma: float) -> np.ndarray:
    g_u = nn.predict(critic, data["u"])[:, 0]
    g_u2 = nn.predict(critic, data["u2"])[:, 0]
    return data["r"] + gamma * (~data["done"]) * g_u2 - g_u


def local_gradients(agent: LocalAgent, traj: Trajectory):
    """Mean ``grad log pi * A`` for the actor and mean ``delta * grad G`` for the critic.

    Both are ascent directions.  Returns ``(actor, critic, mean advantage,
    mean TD error)``; the advantage and the TD error are the same one-step
    quantity here.
    """
    data = traj.arrays()
    n = len(traj)
    delta = td_errors(agent.critic, data, agent.gamma)
    _, g_actor = nn.gaussian_log_prob_grad(agent.actor, data["u"], data["v"], delta / n)
    _, cache = nn.forward(agent.critic, data["u"])
    g_critic = nn.backward(agent.critic, cache, (delta / n)[:, None])
    if not (g_actor.is_finite() and g_critic.is_finite()):
        raise FloatingPointError(f"worker {agent.id}: non-finite gradient")
    m = float(delta.mean())
    return g_actor, g_critic, m, m


class GlobalCoordinator:
    def __init__(self, name: str, actor: nn.MlpParams, critic: nn.MlpParams, n_workers: int,
                 cfg: A3cConfig):
        self.name = name
        self.cfg = cfg
        self.actor = actor
        self.critic = critic
        self.actor_old = actor
        self.K = n_workers
        self.clip = cfg.clip
        self.gamma = cfg.gamma
        self.tau = cfg.tau
        self.mu1, self.mu2, self.rho = cfg.mu1, cfg.mu2, cfg.rho
        self.actor_opt = nn.make_optimizer(cfg.optimizer, cfg.actor_lr)
        self.critic_opt = nn.make_optimizer(cfg.optimizer, cfg.critic_lr)
        self.delta_theta = nn.zeros_like(actor)
        self.delta_phi = nn.zeros_like(critic)
        self.workers: list[LocalAgent] = []
        self.version = 0
        self.skipped = 0
        self.lock = threading.Lock()

    def zero_accumulators(self) -> None:
        self.delta_theta = nn.zeros_like(self.actor)
        self.delta_phi = nn.zeros_like(self.critic)

    def accumulators_are_zero(self) -> bool:
        return self.delta_theta.max_abs() == 0.0 and self.delta_phi.max_abs() == 0.0


def importance_weight(coord: GlobalCoordinator, k: int, now: float, t_k: float, rewards: Sequence[float]) -> float:
    """``mu1 * exp(-rho (now - t_k)) + mu2 * r_k / sum r``; share 1/K when sum r <= 0."""
    total = float(sum(rewards))
    share = rewards[k] / total if total > 0 else 1.0 / len(rewards)
    return coord.mu1 * math.exp(-coord.rho * (now - t_k)) + coord.mu2 * share


def aggregate(coord: GlobalCoordinator, actor_grads: Sequence, critic_grads: Sequence, weights: Sequence[float]):
    """``(1/K) sum_k w_k g_k`` over successful workers, K = configured worker count.

    Failed workers appear as ``None``.  Returns ``None`` if nobody succeeded.
    """
    ok = [i for i, g in enumerate(actor_grads) if g is not None and critic_grads[i] is not None]
    if not ok:
        log.warning("%s: no successful workers this epoch; skipping update", coord.name)
        return None
    d_theta = nn.zeros_like(coord.actor)
    d_phi = nn.zeros_like(coord.critic)
    for i in ok:
        d_theta = d_theta + actor_grads[i].scale(weights[i] / coord.K)
        d_phi = d_phi + critic_grads[i].scale(weights[i] / coord.K)
    coord.delta_theta, coord.delta_phi = d_theta, d_phi
    return d_theta, d_phi


def _blend_step(opt, params, grad, tau):
    return nn.ema_blend(params, opt.step(params, grad, "ascend"), tau)


def global_update(coord: GlobalCoordinator, d_theta: nn.Gradient, d_phi: nn.Gradient,
                  trajectories: Sequence[Trajectory | None], weights: Sequence[float],
                  rng: np.random.Generator | None = None) -> bool:
    """Aggregated step, then ``ppo_epochs - 1`` clipped-surrogate passes; returns False on rollback."""
    cfg = coord.cfg
    saved = (coord.actor, coord.critic)
    try:
        if not (d_theta.is_finite() and d_phi.is_finite()):
            raise FloatingPointError("non-finite aggregate")
        coord.actor = _blend_step(coord.actor_opt, coord.actor, d_theta, coord.tau)
        coord.critic = _blend_step(coord.critic_opt, coord.critic, d_phi, coord.tau)
        if cfg.ppo_epochs > 1:
            _surrogate_passes(coord, trajectories, weights, rng or np.random.default_rng(coord.version))
    except (FloatingPointError, ValueError) as exc:
        log.warning("%s: update rolled back (%s)", coord.name, exc)
        coord.actor, coord.critic = saved
        coord.skipped += 1
        return False
    coord.actor_old = coord.actor
    coord.version += 1
    return True


def _surrogate_passes(coord: GlobalCoordinator, trajectories, weights, rng) -> None:
    cfg = coord.cfg
    parts, scale = [], []
    for traj, w in zip(trajectories, weights):
        if traj is None or not len(traj):
            continue
        d = traj.arrays()
        parts.append(d)
        scale.append(np.full(len(traj), w / (coord.K * len(traj))))
    if not parts:
        return
    data = {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    wt = np.concatenate(scale)
    # advantages under the critic that collected the data
    adv = data["r"] + coord.gamma * (~data["done"]) * nn.predict(coord.critic, data["u2"])[:, 0] \
        - nn.predict(coord.critic, data["u"])[:, 0]
    N = len(wt)
    for _ in range(cfg.ppo_epochs - 1):
        order = rng.permutation(N)
        for start in range(0, N, cfg.minibatch):
            idx = order[start:start + cfg.minibatch]
            w = wt[idx] * (N / len(idx))
            logp, _ = nn.gaussian_log_prob(coord.actor, data["u"][idx], data["v"][idx])
            ratio = np.exp(logp - data["logp"][idx])
            coef = surrogate_coefficients(ratio, adv[idx], coord.clip) * w
            _, g = nn.gaussian_log_prob_grad(coord.actor, data["u"][idx], data["v"][idx], coef)
            sub = {k: v[idx] for k, v in data.items()}
            delta = td_errors(coord.critic, sub, coord.gamma)
            _, cache = nn.forward(coord.critic, sub["u"])
            gc = nn.backward(coord.critic, cache, (delta * w)[:, None])
            if not (g.is_finite() and gc.is_finite()):
                raise FloatingPointError("non-finite surrogate gradient")
            coord.actor = _blend_step(coord.actor_opt, coord.actor, g, coord.tau)
            coord.critic = _blend_step(coord.critic_opt, coord.critic, gc, coord.tau)


def broadcast(coord: GlobalCoordinator, agents: Sequence[LocalAgent], now: int) -> None:
    for a in agents:
        a.actor = coord.actor
        a.critic = coord.critic
        a.t_k = now


# --- trainer ----------------------------------------------------------------

class A3cDppoTrainer:
    """Builds coordinators and workers for a scenario and runs epochs."""

    name = "a3c_dppo"

    def __init__(self, scenario: Scenario, cfg: A3cConfig | None = None, seed: int = 0,
                 execution: str = "sync", threads: bool = False, max_workers: int | None = None):
        self.cfg = cfg or A3cConfig()
        if execution not in ("sync", "async"):
            raise ValueError("execution must be sync or async")
        self.scenario = scenario
        self.seed = seed
        self.execution = execution
        self.threads = threads or execution == "async"
        self.max_workers = max_workers
        self.horizon = scenario.horizon
        topo = scenario.topology
        P = scenario.n_products
        h = self.cfg.hidden
        self.retailer_coords: list[GlobalCoordinator] = []
        for k, name in enumerate(topo.dcs):
            rs = topo.retailers_of(k)
            actor = nn.init_network([retailer_feature_dim(P), *h, P], "tanh", "gaussian", seed=episode_seed(seed, 21, k))
            critic = nn.init_network([retailer_feature_dim(P), *h, 1], "relu", "linear", seed=episode_seed(seed, 22, k))
            self.retailer_coords.append(GlobalCoordinator(name, actor, critic, max(len(rs), 1), self.cfg))
        self.dc_coords: list[GlobalCoordinator] = []
        if self.cfg.tier2:
            for j, name in enumerate(topo.farms):
                ks = topo.dcs_of(j)
                actor = nn.init_network([dc_feature_dim(P), *h, P], "tanh", "gaussian", seed=episode_seed(seed, 23, j))
                critic = nn.init_network([dc_feature_dim(P), *h, 1], "relu", "linear", seed=episode_seed(seed, 24, j))
                self.dc_coords.append(GlobalCoordinator(name, actor, critic, max(len(ks), 1), self.cfg))
        self.agents: list[LocalAgent] = []
        for c in range(len(topo.retailers)):
            self._add_agent("retailer", c, self.retailer_coords[topo.retailer_dc[c]])
        if self.cfg.tier2:
            for k in range(len(topo.dcs)):
                self._add_agent("dc", k, self.dc_coords[topo.dc_farm[k]])
        for coord in self.coordinators:
            broadcast(coord, coord.workers, 0)
        self.epoch = 0
        self.update_rng = np.random.default_rng(episode_seed(seed, 25))

    @property
    def coordinators(self) -> list[GlobalCoordinator]:
        return self.retailer_coords + self.dc_coords

    def _add_agent(self, role: str, node: int, coord: GlobalCoordinator) -> None:
        aid = len(self.agents)
        env = SupplyChainEnv(self.scenario, seed=self.seed, stream_id=100 + aid)
        agent = LocalAgent(aid, role, node, coord.actor, coord.critic, env, self.seed, self.cfg.gamma)
        topo = self.scenario.topology
        H = self.horizon
        if role == "retailer":
            dc = topo.retailer_dc[node]
            agent.features = lambda obs, c=node, k=dc: retailer_features(obs, c, k, H)
            if self.cfg.retailer_reward == "own":
                agent.reward_of = lambda res, c=node: float(res.retailer_rewards[c])
            else:
                agent.reward_of = lambda res: res.reward
        else:
            rs = topo.retailers_of(node)
            agent.features = lambda obs, k=node, rs=rs: dc_features(obs, k, rs, H)
            if self.cfg.dc_reward == "own":
                agent.reward_of = lambda res, k=node: float(res.dc_rewards[k])
            else:
                agent.reward_of = lambda res: res.reward
        agent.peers = lambda obs, rng: self.joint_action(obs, rng, deterministic=False)
        agent.reward_scale = self.cfg.reward_scale
        coord.workers.append(agent)
        self.agents.append(agent)

    # --- acting -------------------------------------------------------------

    def joint_action(self, obs: Observation, rng=None, deterministic: bool = True) -> Action:
        topo = self.scenario.topology
        H = self.horizon
        ret = np.zeros_like(obs.retailer_on_hand)
        for k, coord in enumerate(self.retailer_coords):
            rs = topo.retailers_of(k)
            if not rs:
                continue
            x = np.stack([retailer_features(obs, c, k, H) for c in rs])
            u = self._policy_output(coord.actor, x, rng, deterministic)
            ret[rs] = squash_fraction(u) * obs.retailer_headroom()[rs]
        dc = np.zeros_like(obs.dc_on_hand)
        for j, coord in enumerate(self.dc_coords):
            ks = topo.dcs_of(j)
            if not ks:
                continue
            x = np.stack([dc_features(obs, k, topo.retailers_of(k), H) for k in ks])
            u = self._policy_output(coord.actor, x, rng, deterministic)
            dc[ks] = squash_fraction(u) * obs.dc_headroom()[ks]
        return Action(dc, ret)

    @staticmethod
    def _policy_output(actor, x, rng, deterministic):
        raw = nn.predict(actor, x)
        mean, log_std, _ = nn.split_gaussian(raw)
        if deterministic:
            return mean
        return mean + np.exp(log_std) * rng.standard_normal(mean.shape)

    def policy(self):
        return lambda obs: self.joint_action(obs, deterministic=True)

    # --- epochs -------------------------------------------------------------

    def _work(self, agent: LocalAgent):
        traj = local_collect(agent, self.cfg.episodes_per_epoch * self.horizon)
        try:
            ga, gc, mean_adv, _ = local_gradients(agent, traj)
        except FloatingPointError as exc:
            log.warning("%s", exc)
            return traj, None, None
        mean_r = float(np.mean(traj.r))
        s = self.cfg.reward_smoothing
        agent.rbar = mean_r if not agent.rbar_init else s * mean_r + (1.0 - s) * agent.rbar
        agent.rbar_init = True
        return traj, ga, gc

    def _update(self, coord: GlobalCoordinator, results: dict, now: int) -> None:
        workers = coord.workers
        rewards = [w.rbar for w in workers]
        weights = [importance_weight(coord, i, now, w.t_k, rewards) for i, w in enumerate(workers)]
        trajs = [results[w.id][0] if w.id in results else None for w in workers]
        ga = [results[w.id][1] if w.id in results else None for w in workers]
        gc = [results[w.id][2] if w.id in results else None for w in workers]
        agg = aggregate(coord, ga, gc, weights)
        if agg is not None:
            global_update(coord, agg[0], agg[1], trajs, weights, self.update_rng)
        coord.zero_accumulators()

    def train_epoch(self, epoch: int) -> EpisodeStats:
        self.epoch = epoch
        for coord in self.coordinators:
            coord.zero_accumulators()
        for a in self.agents:
            a.finished = []
        if self.execution == "async":
            self._async_round(epoch)
        else:
            if self.threads:
                with ThreadPoolExecutor(max_workers=self.max_workers or len(self.agents)) as pool:
                    outs = list(pool.map(self._work, self.agents))
            else:
                outs = [self._work(a) for a in self.agents]
            results = {a.id: o for a, o in zip(self.agents, outs)}
            for coord in self.coordinators:
                self._update(coord, results, epoch)
            for coord in self.coordinators:
                broadcast(coord, coord.workers, epoch + 1)
        finished = [s for a in self.agents for s in a.finished]
        return EpisodeStats.mean(finished)

    def _async_round(self, epoch: int) -> None:
        """Each worker submits once; submissions are applied one at a time as they arrive."""
        coord_of = {}
        for coord in self.coordinators:
            for w in coord.workers:
                coord_of[w.id] = coord

        def job(agent: LocalAgent):
            out = self._work(agent)
            coord = coord_of[agent.id]
            with coord.lock:
                now = coord.version
                rewards = [w.rbar for w in coord.workers]
                i = coord.workers.index(agent)
                w_k = importance_weight(coord, i, now, agent.t_k, rewards)
                if out[1] is not None:
                    coord.delta_theta = out[1].scale(w_k / coord.K)
                    coord.delta_phi = out[2].scale(w_k / coord.K)
                    trajs = [out[0] if w is agent else None for w in coord.workers]
                    weights = [w_k if w is agent else 0.0 for w in coord.workers]
                    global_update(coord, coord.delta_theta, coord.delta_phi, trajs, weights, agent.rng)
                coord.zero_accumulators()
                broadcast(coord, [agent], coord.version)

        with ThreadPoolExecutor(max_workers=self.max_workers or len(self.agents)) as pool:
            list(pool.map(job, self.agents))

    def networks(self) -> dict:
        out = {}
        for coord in self.retailer_coords:
            out[f"retailer_actor:{coord.name}"] = coord.actor
            out[f"retailer_critic:{coord.name}"] = coord.critic
        for coord in self.dc_coords:
            out[f"dc_actor:{coord.name}"] = coord.actor
            out[f"dc_critic:{coord.name}"] = coord.critic
        return out


def train(config):
    """Run the configured experiment with the A3C-DPPO trainer; returns a MetricsLog."""
    from .harness.experiment import run_experiment

    return run_experiment(config.with_updates(algorithm="a3c_dppo"))
