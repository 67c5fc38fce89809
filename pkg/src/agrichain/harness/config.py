"""YAML experiment configuration: parsing, validation, scenario construction.

The schema is documented in ``docs/config_schema.md``.  Unknown keys are
rejected and every error names the offending key path.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any

import yaml

from ..env import FleetSpec, NetworkTopology, NodeProductParams, ProductSpec, Scenario, dc_edge, retailer_edge
from ..env.scenario import ScenarioError
from ..stochastic import DemandModel, DistributionSpec, LeadTimeModel, weekday_schedule

ALGORITHMS = ("ss", "dqn", "sac", "ppo_central", "a3c_dppo", "random")
EXECUTION = ("sync", "async")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _expect(value, kind, path):
    if not isinstance(value, kind):
        names = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise ConfigError(path, f"expected {names}, got {type(value).__name__}")
    return value


def _number(value, path, minimum=None, strict=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if minimum is not None and (v < minimum or (strict and v == minimum)):
        raise ConfigError(path, f"must be {'>' if strict else '>='} {minimum}, got {value!r}")
    return v


def _integer(value, path, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value


def _check_keys(mapping: dict, allowed, path: str, required=()):
    _expect(mapping, dict, path)
    for key in mapping:
        if key not in allowed:
            raise ConfigError(f"{path}.{key}" if path else str(key), "unknown key")
    for key in required:
        if key not in mapping:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required key")


def _dataclass_from(cls, mapping: dict, path: str, required=()):
    names = {f.name for f in fields(cls)}
    _check_keys(mapping, names, path, required)
    try:
        return cls(**mapping)
    except (TypeError, ValueError) as exc:
        raise ConfigError(path, str(exc)) from None


def _spec(value, path) -> DistributionSpec:
    try:
        return DistributionSpec.parse(value)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(path, f"bad distribution spec {value!r}: {exc}") from None


# --- scenario -------------------------------------------------------------

SCENARIO_KEYS = ("name", "horizon", "mode", "transport_mode", "fixed_cost_source", "handling_loss",
                 "lead_time_floor", "forecast", "topology", "products", "dc_params", "retailer_params",
                 "demand", "lead_times")


def _topology(raw: dict) -> NetworkTopology:
    path = "topology"
    _check_keys(raw, ("farms", "dcs", "retailers", "fleet"), path, ("farms", "dcs", "retailers"))
    farms = [str(f) for f in _expect(raw["farms"], list, f"{path}.farms")]
    if len(set(farms)) != len(farms):
        raise ConfigError(f"{path}.farms", "duplicate farm names")
    dcs, dc_farm, dist_fk = [], [], []
    for i, d in enumerate(_expect(raw["dcs"], list, f"{path}.dcs")):
        p = f"{path}.dcs[{i}]"
        _check_keys(d, ("name", "farm", "farms", "distance"), p, ("name",))
        src = d.get("farms", d.get("farm"))
        if isinstance(src, list):
            if len(src) != 1:
                raise ConfigError(p, f"C3 violated: DC {d['name']} assigned to {len(src)} farms")
            src = src[0]
        if src not in farms:
            raise ConfigError(f"{p}.farm", f"C3 violated: unknown or missing farm {src!r}")
        dcs.append(str(d["name"]))
        dc_farm.append(farms.index(src))
        dist_fk.append(_number(d.get("distance", 50.0), f"{p}.distance", 0.0))
    rets, ret_dc, dist_kc = [], [], []
    for i, r in enumerate(_expect(raw["retailers"], list, f"{path}.retailers")):
        p = f"{path}.retailers[{i}]"
        _check_keys(r, ("name", "dc", "dcs", "distance"), p, ("name",))
        src = r.get("dcs", r.get("dc"))
        if isinstance(src, list):
            if len(src) != 1:
                raise ConfigError(p, f"C4 violated: retailer {r['name']} assigned to {len(src)} DCs")
            src = src[0]
        if src not in dcs:
            raise ConfigError(f"{p}.dc", f"C4 violated: unknown or missing DC {src!r}")
        rets.append(str(r["name"]))
        ret_dc.append(dcs.index(src))
        dist_kc.append(_number(r.get("distance", 10.0), f"{p}.distance", 0.0))
    if len(set(dcs)) != len(dcs) or len(set(rets)) != len(rets):
        raise ConfigError(path, "duplicate node names")
    fleet = _dataclass_from(FleetSpec, raw.get("fleet", {}), f"{path}.fleet")
    try:
        return NetworkTopology(tuple(farms), tuple(dcs), tuple(rets), tuple(dc_farm), tuple(ret_dc),
                               tuple(dist_fk), tuple(dist_kc), fleet)
    except ScenarioError as exc:
        raise ConfigError(path, str(exc)) from None


def _node_table(raw, names, n_products, path, required) -> tuple:
    _expect(raw, dict, path)
    out = []
    for key in raw:
        if key not in names and key != "default":
            raise ConfigError(f"{path}.{key}", "unknown node")
    for name in names:
        rows = raw.get(name, raw.get("default"))
        if rows is None:
            raise ConfigError(f"{path}.{name}", "missing parameters")
        _expect(rows, list, f"{path}.{name}")
        if len(rows) != n_products:
            raise ConfigError(f"{path}.{name}", f"expected {n_products} product rows, got {len(rows)}")
        out.append(tuple(_dataclass_from(NodeProductParams, row, f"{path}.{name}[{p}]", required)
                         for p, row in enumerate(rows)))
    return tuple(out)


def _demand(raw, retailers, n_products) -> DemandModel:
    path = "demand"
    _check_keys(raw, ("patterns", "assignment"), path, ("patterns", "assignment"))
    patterns = {}
    for pname, slots in _expect(raw["patterns"], dict, f"{path}.patterns").items():
        p = f"{path}.patterns.{pname}"
        if isinstance(slots, list):
            if len(slots) != 7:
                raise ConfigError(p, f"weekday list needs 7 entries, got {len(slots)}")
            patterns[pname] = tuple(_spec(s, f"{p}[{i}]") for i, s in enumerate(slots))
        else:
            _check_keys(slots, ("mon_wed", "thu_fri", "sat_sun"), p, ("mon_wed", "thu_fri", "sat_sun"))
            patterns[pname] = weekday_schedule(*(_spec(slots[k], f"{p}.{k}") for k in ("mon_wed", "thu_fri", "sat_sun")))
    assign = _expect(raw["assignment"], dict, f"{path}.assignment")
    for key in assign:
        if key not in retailers and key != "default":
            raise ConfigError(f"{path}.assignment.{key}", "unknown retailer")
    schedules = {}
    for c, name in enumerate(retailers):
        row = assign.get(name, assign.get("default"))
        p = f"{path}.assignment.{name}"
        if row is None:
            raise ConfigError(p, "missing demand assignment")
        _expect(row, list, p)
        if len(row) != n_products:
            raise ConfigError(p, f"expected {n_products} patterns, got {len(row)}")
        for pi, pat in enumerate(row):
            if pat not in patterns:
                raise ConfigError(f"{p}[{pi}]", f"unknown pattern {pat!r}")
            schedules[(c, pi)] = patterns[pat]
    return DemandModel(schedules)


def _lead_times(raw, topo: NetworkTopology, floor: int) -> LeadTimeModel:
    path = "lead_times"
    _check_keys(raw, ("default", "edges"), path)
    default = _spec(raw["default"], f"{path}.default") if "default" in raw else None
    edges_raw = _expect(raw.get("edges", {}), dict, f"{path}.edges")
    for key in edges_raw:
        if key not in topo.dcs and key not in topo.retailers:
            raise ConfigError(f"{path}.edges.{key}", "unknown receiving node")
    edges = {}
    for k, name in enumerate(topo.dcs):
        edges[dc_edge(k)] = _spec(edges_raw[name], f"{path}.edges.{name}") if name in edges_raw else default
    for c, name in enumerate(topo.retailers):
        edges[retailer_edge(c)] = _spec(edges_raw[name], f"{path}.edges.{name}") if name in edges_raw else default
    missing = [e for e, s in edges.items() if s is None]
    if missing:
        raise ConfigError(f"{path}.default", "needed for edges without an explicit entry")
    try:
        return LeadTimeModel(edges, floor)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def build_scenario(raw: dict) -> Scenario:
    for key in ("topology", "products", "dc_params", "retailer_params", "demand", "lead_times"):
        if key not in raw:
            raise ConfigError(key, "missing required key")
    topo = _topology(raw["topology"])
    products = []
    for i, p in enumerate(_expect(raw["products"], list, "products")):
        products.append(_dataclass_from(ProductSpec, p, f"products[{i}]", ("name", "delta", "mu", "shelf_life")))
    if not products:
        raise ConfigError("products", "at least one product required")
    P = len(products)
    need = ("initial", "capacity", "sale_price", "holding", "shortage", "wastage")
    dc_params = _node_table(raw["dc_params"], topo.dcs, P, "dc_params", need)
    ret_params = _node_table(raw["retailer_params"], topo.retailers, P, "retailer_params", need)
    demand = _demand(raw["demand"], topo.retailers, P)
    floor = _integer(raw.get("lead_time_floor", 1), "lead_time_floor", 0)
    if floor > 1:
        raise ConfigError("lead_time_floor", "must be 0 or 1")
    leads = _lead_times(raw["lead_times"], topo, floor)
    fc = raw.get("forecast", {})
    _check_keys(fc, ("demand_window", "lead_smoothing"), "forecast")
    kw = dict(
        horizon=_integer(raw.get("horizon", 30), "horizon", 1),
        mode=raw.get("mode", "clip"),
        transport_mode=raw.get("transport_mode", "literal"),
        fixed_cost_source=raw.get("fixed_cost_source", "product"),
        handling_loss=_number(raw.get("handling_loss", 0.01), "handling_loss", 0.0),
        demand_window=_integer(fc.get("demand_window", 7), "forecast.demand_window", 1),
        lead_smoothing=_number(fc.get("lead_smoothing", 0.3), "forecast.lead_smoothing", 0.0, strict=True),
    )
    try:
        return Scenario(topo, tuple(products), dc_params, ret_params, demand, leads, **kw)
    except ScenarioError as exc:
        msg = str(exc)
        key = next((k for k in ("mode", "transport_mode", "fixed_cost_source", "handling_loss", "horizon")
                    if k in msg), "scenario")
        raise ConfigError(key, msg) from None


# --- experiment -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    name: str
    scenario: Scenario
    algorithm: str = "a3c_dppo"
    epochs: int = 300
    seeds: tuple[int, ...] = (0,)
    eval_episodes: int = 20
    workers: int | None = None       # a3c_dppo thread-pool size; None = one thread per worker
    execution: str = "sync"
    threads: bool = False
    hyperparameters: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    def with_updates(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def algo_hyper(self, algorithm: str | None = None):
        """Typed hyperparameters for ``algorithm`` (network block merged in)."""
        from ..agents import hyperparameter_class

        algo = algorithm or self.algorithm
        cls = hyperparameter_class(algo)
        if cls is None:
            return None
        merged = {}
        net = self.hyperparameters.get("network", {})
        names = {f.name for f in fields(cls)}
        for k, v in net.items():
            if k in names:
                merged[k] = v
        merged.update(self.hyperparameters.get(algo, {}))
        for k in ("hidden", "s_grid", "S_grid", "nodes"):
            if k in merged and isinstance(merged[k], list):
                merged[k] = tuple(tuple(x) if isinstance(x, list) else x for x in merged[k])
        try:
            return cls(**merged)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"hyperparameters.{algo}", str(exc)) from None


EXPERIMENT_KEYS = ("algorithm", "epochs", "seeds", "eval_episodes", "workers", "execution", "threads",
                   "hyperparameters")
NETWORK_KEYS = ("hidden", "actor_lr", "critic_lr", "clip", "gamma", "optimizer")


def _hyperparameters(raw) -> dict:
    from ..agents import hyperparameter_class

    path = "hyperparameters"
    _expect(raw, dict, path)
    out = {}
    for key, block in raw.items():
        p = f"{path}.{key}"
        if key == "network":
            _check_keys(block, NETWORK_KEYS, p)
        elif key in ALGORITHMS:
            cls = hyperparameter_class(key)
            allowed = () if cls is None else tuple(f.name for f in fields(cls))
            _check_keys(block, allowed, p)
        else:
            raise ConfigError(p, "unknown key")
        out[key] = dict(block)
    return out


def parse_config(raw: Any, source: str = "<config>") -> ExperimentConfig:
    if raw is None:
        raise ConfigError("", f"{source}: empty configuration")
    _expect(raw, dict, "")
    _check_keys(raw, SCENARIO_KEYS + EXPERIMENT_KEYS, "")
    scenario = build_scenario(raw)
    algo = raw.get("algorithm", "a3c_dppo")
    if algo not in ALGORITHMS:
        raise ConfigError("algorithm", f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    seeds = raw.get("seeds", [0])
    if isinstance(seeds, int) and not isinstance(seeds, bool):
        seeds = [seeds]
    _expect(seeds, list, "seeds")
    if not seeds:
        raise ConfigError("seeds", "at least one seed required")
    seeds = tuple(_integer(s, f"seeds[{i}]", 0) for i, s in enumerate(seeds))
    execution = raw.get("execution", "sync")
    if execution not in EXECUTION:
        raise ConfigError("execution", f"must be sync or async, got {execution!r}")
    workers = raw.get("workers")
    if workers is not None:
        workers = _integer(workers, "workers", 1)
    cfg = ExperimentConfig(
        name=str(raw.get("name", Path(source).stem)),
        scenario=scenario,
        algorithm=algo,
        epochs=_integer(raw.get("epochs", 300), "epochs", 0),
        seeds=seeds,
        eval_episodes=_integer(raw.get("eval_episodes", 20), "eval_episodes", 1),
        workers=workers,
        execution=execution,
        threads=bool(_expect(raw.get("threads", False), bool, "threads")),
        hyperparameters=_hyperparameters(raw.get("hyperparameters", {})),
        raw=raw,
    )
    for algo_name in cfg.hyperparameters:
        if algo_name != "network":
            cfg.algo_hyper(algo_name)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError("", f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError("", f"{path}: invalid YAML: {exc}") from None
    return parse_config(raw, str(path))


def builtin_config_path(name: str) -> Path:
    """Path of a config shipped with the package (``default``, ``large_network``)."""
    ref = resources.files("agrichain") / "configs" / f"{name}.yaml"
    return Path(str(ref))


def load_builtin(name: str = "default") -> ExperimentConfig:
    return load_config(builtin_config_path(name))
