"""Training/evaluation orchestration and parameter sweeps."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .. import nn
from ..agents import DqnAgent, PpoCentralAgent, RandomPolicy, SacAgent, ss_grid_tune
from ..agents.common import EpisodeStats, episode_seed, evaluate, run_episode
from ..env import Scenario, SupplyChainEnv, retailer_edge
from ..stochastic import DemandModel, DistributionSpec, LeadTimeModel
from .config import ConfigError, ExperimentConfig
from .metrics import MetricsLog, row_from_stats

log = logging.getLogger(__name__)

AXES = ("demand_variance", "leadtime_rate", "perishability_delta", "topology_scale")


class ExperimentError(RuntimeError):
    pass


def _ms(t0: float) -> float:
    return round((time.perf_counter() - t0) * 1000.0, 3)


def build_learner(config: ExperimentConfig, seed: int, scenario: Scenario | None = None):
    """Learner object with ``train_epoch``/``policy``/``networks`` for the configured algorithm."""
    scenario = scenario or config.scenario
    algo = config.algorithm
    hyper = config.algo_hyper(algo)
    if algo == "dqn":
        return DqnAgent(scenario, hyper, seed=seed, total_steps=config.epochs * scenario.horizon)
    if algo == "sac":
        return SacAgent(scenario, hyper, seed=seed)
    if algo == "ppo_central":
        return PpoCentralAgent(scenario, hyper, seed=seed)
    if algo == "a3c_dppo":
        from ..a3c_dppo import A3cDppoTrainer
        return A3cDppoTrainer(scenario, hyper, seed=seed, execution=config.execution, threads=config.threads,
                              max_workers=config.workers)
    raise ExperimentError(f"{algo} is not a learning algorithm")


def tune_ss(config: ExperimentConfig, seed: int, scenario: Scenario | None = None):
    scenario = scenario or config.scenario
    h = config.algo_hyper("ss")
    env = SupplyChainEnv(scenario, seed=seed, stream_id=19)
    return ss_grid_tune(env, h.s_grid, h.S_grid, episodes=h.episodes, seed=seed, nodes=h.nodes,
                        relative=h.relative, sweeps=h.sweeps)


def _run_seed(config: ExperimentConfig, seed: int, emit: Callable[[dict], None],
              progress: Callable[[str], None] | None = None, checkpoint_dir=None) -> None:
    algo = config.algorithm
    scenario = config.scenario
    eval_env = SupplyChainEnv(scenario, seed=seed, stream_id=3)
    t0 = time.perf_counter()
    if algo == "random":
        # no learning: every epoch is one fresh episode of the random policy
        policy = RandomPolicy(episode_seed(seed, 31))
        env = SupplyChainEnv(scenario, seed=seed, stream_id=5)
        for epoch in range(1, config.epochs + 1):
            stats = run_episode(env, policy, episode_seed(seed, 32, epoch))
            emit(row_from_stats(epoch, seed, algo, stats, _ms(t0)))
        return
    if algo == "ss":
        policy = tune_ss(config, seed)
        stats = evaluate(eval_env, policy, config.eval_episodes, seed)
        emit(row_from_stats(0, seed, algo, stats, _ms(t0)))
        return
    learner = build_learner(config, seed)
    for epoch in range(1, config.epochs + 1):
        stats = learner.train_epoch(epoch)
        emit(row_from_stats(epoch, seed, algo, stats, _ms(t0)))
        if progress and (epoch % 50 == 0 or epoch == config.epochs):
            progress(f"{algo} seed={seed} epoch={epoch} reward={stats.reward:.1f}")
    if checkpoint_dir is not None:
        Path(checkpoint_dir).mkdir(parents=True, exist_ok=True)
        save_checkpoint(learner, Path(checkpoint_dir) / f"{algo}_seed{seed}.json", config, config.epochs, seed)
    if config.eval_episodes > 0:
        stats = evaluate(eval_env, learner.policy(), config.eval_episodes, seed)
        emit(row_from_stats(config.epochs, seed, f"{algo}:eval", stats, _ms(t0)))


def run_experiment(config: ExperimentConfig, progress: Callable[[str], None] | None = None,
                   tag: dict | None = None, sink: MetricsLog | None = None, checkpoint_dir=None) -> MetricsLog:
    """Train (or tune) and evaluate once per seed; rows are appended in seed order."""
    out = sink if sink is not None else MetricsLog(sweep=tag is not None)
    extra = tag or {}

    def emit(row: dict) -> None:
        out.append({**extra, **row})

    for seed in config.seeds:
        try:
            _run_seed(config, seed, emit, progress, checkpoint_dir)
        except ConfigError:
            raise
        except Exception as exc:
            raise ExperimentError(f"{config.algorithm} seed {seed}: {type(exc).__name__}: {exc}") from exc
    return out


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    base: ExperimentConfig

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; choose from {', '.join(AXES)}")
        if not self.values:
            raise ValueError("sweep values must be nonempty")
        for v in self.values:
            if self.axis == "demand_variance" and v < 0:
                raise ValueError("demand_variance values must be >= 0")
            if self.axis == "leadtime_rate" and v <= 0:
                raise ValueError("leadtime_rate values must be > 0")
            if self.axis == "perishability_delta" and not (0 <= v <= 1):
                raise ValueError("perishability_delta values must lie in [0, 1]")
            if self.axis == "topology_scale" and (int(v) != v or v < 1):
                raise ValueError("topology_scale values must be positive integers")


def scale_topology(scenario: Scenario, factor: int) -> Scenario:
    """Replicate every retailer ``factor`` times under its DC (same parameters, demand and leads)."""
    from ..env.scenario import NetworkTopology

    if factor == 1:
        return scenario
    topo = scenario.topology
    names, dcs, dist, params, assign = [], [], [], [], []
    for rep in range(factor):
        for c, name in enumerate(topo.retailers):
            names.append(name if rep == 0 else f"{name}_{rep}")
            dcs.append(topo.retailer_dc[c])
            dist.append(topo.dist_dc_retailer[c])
            params.append(scenario.retailer_params[c])
            assign.append(c)
    new_topo = NetworkTopology(topo.farms, topo.dcs, tuple(names), topo.dc_farm, tuple(dcs), topo.dist_farm_dc,
                               tuple(dist), topo.fleet)
    sched = {(c, p): slots for (src, p), slots in scenario.demand.schedules.items()
             for c, a in enumerate(assign) if a == src}
    edges = {e: spec for e, spec in scenario.lead_times.edges.items() if e[0] != "retailer"}
    edges.update({retailer_edge(c): scenario.lead_times.edges[retailer_edge(a)] for c, a in enumerate(assign)})
    demand = DemandModel(sched)
    leads = LeadTimeModel(edges, scenario.lead_times.floor)
    return scenario.with_updates(topology=new_topo, retailer_params=tuple(params), demand=demand, lead_times=leads)


def apply_axis(scenario: Scenario, axis: str, value) -> Scenario:
    if axis == "demand_variance":
        return scenario.with_demand_spread(1.0 + float(value))
    if axis == "leadtime_rate":
        return scenario.with_lead_time(DistributionSpec("exponential", (float(value),)))
    if axis == "perishability_delta":
        return scenario.with_perishability(float(value))
    if axis == "topology_scale":
        return scale_topology(scenario, int(value))
    raise ValueError(f"unknown axis {axis!r}")


def run_sweep(sweep: SweepSpec, progress: Callable[[str], None] | None = None) -> MetricsLog:
    """One experiment per axis value; rows carry ``axis`` and ``axis_value``."""
    out = MetricsLog(sweep=True)
    for v in sweep.values:
        cfg = sweep.base.with_updates(scenario=apply_axis(sweep.base.scenario, sweep.axis, v))
        if progress:
            progress(f"sweep {sweep.axis}={v}")
        run_experiment(cfg, progress, tag={"axis": sweep.axis, "axis_value": float(v)}, sink=out)
    return out


def final_window_mean(log: MetricsLog, seed: int, algorithm: str, window: int = 50) -> float:
    """Mean training reward over the last ``window`` epochs of one run."""
    rows = [r for r in log if r["seed"] == seed and r["algorithm"] == algorithm and r["epoch"] > 0]
    if not rows:
        raise ValueError(f"no rows for {algorithm} seed {seed}")
    tail = rows[-window:]
    return sum(r["mean_episode_reward"] for r in tail) / len(tail)


# --- checkpoints ------------------------------------------------------------

def config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.raw, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(learner, path, config: ExperimentConfig, epoch: int, seed: int) -> None:
    header = {"algorithm": config.algorithm, "epoch": int(epoch), "seed": int(seed),
              "steps": int(getattr(learner, "steps", epoch * config.scenario.horizon)),
              "config_hash": config_hash(config),
              "hyperparameters": dataclasses.asdict(config.algo_hyper(config.algorithm))}
    nn.save_snapshot(path, learner.networks(), header)


def restore_learner(config: ExperimentConfig, path, seed: int | None = None):
    """Rebuild a learner and load its networks from a checkpoint written by ``save_checkpoint``."""
    header, nets = nn.load_snapshot(path)
    if header.get("algorithm") != config.algorithm:
        raise ExperimentError(f"checkpoint holds {header.get('algorithm')!r}, config asks for {config.algorithm!r}")
    learner = build_learner(config, header.get("seed", 0) if seed is None else seed)
    have = learner.networks()
    if set(have) != set(nets):
        raise ExperimentError(f"checkpoint networks {sorted(nets)} do not match {sorted(have)}")
    for name, params in nets.items():
        if params.layer_sizes != have[name].layer_sizes:
            raise ExperimentError(f"network {name}: layer sizes {params.layer_sizes} != {have[name].layer_sizes}")
        if ":" in name:
            kind, node = name.split(":", 1)
            coords = learner.retailer_coords if kind.startswith("retailer") else learner.dc_coords
            coord = next(c for c in coords if c.name == node)
            if kind.endswith("actor"):
                coord.actor = coord.actor_old = params
            else:
                coord.critic = params
        else:
            setattr(learner, name, params)
    if hasattr(learner, "coordinators"):
        from ..a3c_dppo import broadcast
        for coord in learner.coordinators:
            broadcast(coord, coord.workers, header.get("epoch", 0))
    if hasattr(learner, "actor_old"):
        learner.actor_old = learner.actor
    return learner
