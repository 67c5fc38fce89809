"""Static description of a farm -> distribution center -> retailer network."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from ..stochastic import DemandModel, DistributionSpec, LeadTimeModel


class ScenarioError(ValueError):
    """Invalid scenario or topology."""


@dataclass(frozen=True)
class ProductSpec:
    name: str
    delta: float                 # wastage penalty coefficient
    mu: float                    # deterioration sensitivity
    shelf_life: int              # periods until freshness reaches 0
    farm_unit_production_cost: float = 0.0
    farm_unit_inventory_cost: float = 0.0
    fixed_ordering_cost: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ScenarioError(f"product {self.name}: delta must lie in [0, 1]")
        if self.mu <= 0:
            raise ScenarioError(f"product {self.name}: mu must be > 0")
        if self.shelf_life < 1:
            raise ScenarioError(f"product {self.name}: shelf_life must be >= 1")
        if min(self.farm_unit_production_cost, self.farm_unit_inventory_cost, self.fixed_ordering_cost) < 0:
            raise ScenarioError(f"product {self.name}: costs must be >= 0")


@dataclass(frozen=True)
class NodeProductParams:
    """Per (node, product) prices, unit costs, capacity and opening stock.

    ``purchase_price`` is only meaningful at a distribution center (what the
    farm charges); retailers pay their DC's ``sale_price``.
    """

    initial: float
    capacity: float
    sale_price: float
    holding: float
    shortage: float
    wastage: float
    fixed_order_price: float = 0.0
    purchase_price: float = 0.0

    def __post_init__(self):
        vals = (self.initial, self.capacity, self.sale_price, self.holding, self.shortage,
                self.wastage, self.fixed_order_price, self.purchase_price)
        if min(vals) < 0 or not all(np.isfinite(vals)):
            raise ScenarioError("node/product costs, prices and quantities must be finite and >= 0")
        if self.capacity <= 0:
            raise ScenarioError("capacity must be > 0")


@dataclass(frozen=True)
class FleetSpec:
    vehicles: int = 10                  # M
    vehicle_capacity: float = 4000.0    # Q_m
    loading_cost: float = 26.0
    unloading_cost: float = 26.0
    fuel_cost: float = 40.0
    fixed_cost_dc: float = 18.0         # per dispatch farm -> DC
    fixed_cost_retailer: float = 18.0   # per dispatch DC -> retailer

    def __post_init__(self):
        if self.vehicles < 1:
            raise ScenarioError("fleet needs at least one vehicle")
        if self.vehicle_capacity <= 0:
            raise ScenarioError("vehicle capacity must be > 0")


@dataclass(frozen=True)
class NetworkTopology:
    farms: tuple[str, ...]
    dcs: tuple[str, ...]
    retailers: tuple[str, ...]
    dc_farm: tuple[int, ...]            # supplying farm index per DC
    retailer_dc: tuple[int, ...]        # supplying DC index per retailer
    dist_farm_dc: tuple[float, ...]     # km, per DC
    dist_dc_retailer: tuple[float, ...]  # km, per retailer
    fleet: FleetSpec = field(default_factory=FleetSpec)

    def __post_init__(self):
        if not self.farms or not self.dcs or not self.retailers:
            raise ScenarioError("topology needs at least one farm, DC and retailer")
        if len(self.dc_farm) != len(self.dcs):
            raise ScenarioError("C3: every DC must be assigned exactly one farm")
        if len(self.retailer_dc) != len(self.retailers):
            raise ScenarioError("C4: every retailer must be assigned exactly one DC")
        if any(not 0 <= j < len(self.farms) for j in self.dc_farm):
            raise ScenarioError("C3: DC assigned to an unknown farm")
        if any(not 0 <= k < len(self.dcs) for k in self.retailer_dc):
            raise ScenarioError("C4: retailer assigned to an unknown DC")
        if len(self.dist_farm_dc) != len(self.dcs) or len(self.dist_dc_retailer) != len(self.retailers):
            raise ScenarioError("one distance per edge required")
        if min(self.dist_farm_dc) < 0 or min(self.dist_dc_retailer) < 0:
            raise ScenarioError("distances must be >= 0")

    def retailers_of(self, k: int) -> list[int]:
        return [c for c, kk in enumerate(self.retailer_dc) if kk == k]

    def dcs_of(self, j: int) -> list[int]:
        return [k for k, jj in enumerate(self.dc_farm) if jj == j]


def dc_edge(k: int) -> tuple[str, int]:
    return ("dc", k)


def retailer_edge(c: int) -> tuple[str, int]:
    return ("retailer", c)


@dataclass(frozen=True)
class Scenario:
    topology: NetworkTopology
    products: tuple[ProductSpec, ...]
    dc_params: tuple[tuple[NodeProductParams, ...], ...]        # [dc][product]
    retailer_params: tuple[tuple[NodeProductParams, ...], ...]  # [retailer][product]
    demand: DemandModel
    lead_times: LeadTimeModel
    horizon: int = 30
    mode: str = "clip"                   # clip | strict
    transport_mode: str = "literal"      # literal | per_vehicle
    fixed_cost_source: str = "product"   # product (c_f) | node (fixed ordering price)
    handling_loss: float = 0.01
    demand_window: int = 7
    lead_smoothing: float = 0.3

    def __post_init__(self):
        topo = self.topology
        P = len(self.products)
        if P == 0:
            raise ScenarioError("at least one product required")
        if len(self.dc_params) != len(topo.dcs) or any(len(r) != P for r in self.dc_params):
            raise ScenarioError("dc_params must be [dc][product]")
        if len(self.retailer_params) != len(topo.retailers) or any(len(r) != P for r in self.retailer_params):
            raise ScenarioError("retailer_params must be [retailer][product]")
        if self.horizon < 1:
            raise ScenarioError("horizon must be >= 1")
        if self.mode not in ("clip", "strict"):
            raise ScenarioError(f"mode must be clip or strict, got {self.mode!r}")
        if self.transport_mode not in ("literal", "per_vehicle"):
            raise ScenarioError(f"unknown transport_mode {self.transport_mode!r}")
        if self.fixed_cost_source not in ("product", "node"):
            raise ScenarioError(f"unknown fixed_cost_source {self.fixed_cost_source!r}")
        if not 0.0 <= self.handling_loss < 1.0:
            raise ScenarioError("handling_loss must lie in [0, 1)")
        for c in range(len(topo.retailers)):
            for p in range(P):
                if (c, p) not in self.demand.schedules:
                    raise ScenarioError(f"no demand schedule for retailer {topo.retailers[c]}, product {p}")
        for k in range(len(topo.dcs)):
            if dc_edge(k) not in self.lead_times.edges:
                raise ScenarioError(f"no lead time for edge into {topo.dcs[k]}")
        for c in range(len(topo.retailers)):
            if retailer_edge(c) not in self.lead_times.edges:
                raise ScenarioError(f"no lead time for edge into {topo.retailers[c]}")
        for k, row in enumerate(self.dc_params):
            for p, q in enumerate(row):
                if q.sale_price < q.purchase_price:
                    warnings.warn(f"{topo.dcs[k]} product {p}: sale price below purchase price")
                if q.initial > q.capacity and self.mode == "clip":
                    raise ScenarioError(f"C1: initial stock above capacity at {topo.dcs[k]}")
        for c, row in enumerate(self.retailer_params):
            k = topo.retailer_dc[c]
            for p, q in enumerate(row):
                if q.sale_price < self.dc_params[k][p].sale_price:
                    warnings.warn(f"{topo.retailers[c]} product {p}: sale price below purchase price")
                if q.initial > q.capacity and self.mode == "clip":
                    raise ScenarioError(f"C2: initial stock above capacity at {topo.retailers[c]}")

    @property
    def n_products(self) -> int:
        return len(self.products)

    def with_updates(self, **kw) -> "Scenario":
        return replace(self, **kw)

    def with_demand_spread(self, factor: float) -> "Scenario":
        sched = {key: tuple(s.with_spread(factor) for s in slots)
                 for key, slots in self.demand.schedules.items()}
        return replace(self, demand=DemandModel(sched))

    def with_lead_time(self, spec: DistributionSpec) -> "Scenario":
        edges = {e: spec for e in self.lead_times.edges}
        return replace(self, lead_times=LeadTimeModel(edges, self.lead_times.floor))

    def with_perishability(self, delta: float) -> "Scenario":
        return replace(self, products=tuple(replace(p, delta=delta) for p in self.products))
