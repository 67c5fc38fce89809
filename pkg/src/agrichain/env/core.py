"""Multi-echelon perishable inventory simulator.

One call to :meth:`SupplyChainEnv.step` runs a period in this order:

1. arrivals: pipeline counters tick down, matured orders are delivered
   (oldest first) into the age-0 bucket, minus a handling-loss fraction;
2. order placement: DC orders to farms and retailer orders to DCs are clipped
   to capacity headroom and fleet limits (clip mode) and fixed ordering costs
   are charged; farm shipments enter the pipeline;
3. DCs ship retailer orders from stock (oldest first, rationed
   proportionally when short), then customer demand is served oldest first;
4. shortage: unmet demand at retailers and unmet retailer orders at DCs;
5. aging: ages advance, expired buckets are purged, remaining buckets lose
   ``qty * delta * exp(-mu * F)``;
6. holding on ``{v + a - d}+`` with v the stock before demand and a the
   quantity still in transit;
7. transport for every dispatch of the period;
8. revenue, reward.

Lead times are sampled for every edge and demand for every retailer/product
each period whether or not anything ships, so two policies run on the same
seed see the same random draws.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..stochastic import RngStream, forecast_demand, round_lead_time
from .costs import edge_transport_cost, vehicles_needed
from .scenario import Scenario, dc_edge, retailer_edge

TRACE_COLUMNS = ("t", "node", "product", "on_hand", "pipeline", "ordered", "arrived", "sold", "unmet",
                 "wasted", "holding_cost", "shortage_cost", "wastage_cost", "transport_cost", "reward")


@dataclass(frozen=True)
class Observation:
    t: int
    day_of_week: int
    retailer_on_hand: np.ndarray         # (C, P)
    retailer_pipeline: np.ndarray        # (C, P)
    retailer_lead_forecast: np.ndarray   # (C,)
    retailer_demand_forecast: np.ndarray  # (C, P)
    dc_on_hand: np.ndarray               # (K, P)
    dc_pipeline: np.ndarray              # (K, P)
    dc_lead_forecast: np.ndarray         # (K,)
    retailer_capacity: np.ndarray        # (C, P)
    dc_capacity: np.ndarray              # (K, P)

    @property
    def day_one_hot(self) -> np.ndarray:
        z = np.zeros(7)
        z[self.day_of_week] = 1.0
        return z

    def retailer_headroom(self) -> np.ndarray:
        return np.maximum(self.retailer_capacity - self.retailer_on_hand - self.retailer_pipeline, 0.0)

    def dc_headroom(self) -> np.ndarray:
        return np.maximum(self.dc_capacity - self.dc_on_hand - self.dc_pipeline, 0.0)

    def vector(self) -> np.ndarray:
        """Raw network-wide state in a fixed order."""
        return np.concatenate([
            self.retailer_on_hand.ravel(), self.retailer_pipeline.ravel(), self.retailer_lead_forecast,
            self.retailer_demand_forecast.ravel(), self.dc_on_hand.ravel(), self.dc_pipeline.ravel(),
            self.dc_lead_forecast, self.day_one_hot])

    def features(self) -> np.ndarray:
        """Same layout as :meth:`vector`, stock scaled by capacity, leads by 10."""
        rc, dcap = self.retailer_capacity, self.dc_capacity
        return np.concatenate([
            (self.retailer_on_hand / rc).ravel(), (self.retailer_pipeline / rc).ravel(),
            self.retailer_lead_forecast / 10.0, (self.retailer_demand_forecast / rc).ravel(),
            (self.dc_on_hand / dcap).ravel(), (self.dc_pipeline / dcap).ravel(),
            self.dc_lead_forecast / 10.0, self.day_one_hot])


@dataclass(frozen=True)
class Action:
    dc_orders: np.ndarray        # (K, P) units
    retailer_orders: np.ndarray  # (C, P) units

    @classmethod
    def zeros(cls, n_dcs: int, n_retailers: int, n_products: int) -> "Action":
        return cls(np.zeros((n_dcs, n_products)), np.zeros((n_retailers, n_products)))


@dataclass(frozen=True)
class CostBreakdown:
    purchasing: float = 0.0
    holding: float = 0.0
    wastage: float = 0.0
    shortage: float = 0.0
    transport: float = 0.0

    @property
    def total(self) -> float:
        return self.purchasing + self.holding + self.wastage + self.shortage + self.transport

    @property
    def inventory(self) -> float:
        """Everything except purchasing."""
        return self.holding + self.wastage + self.shortage + self.transport

    def __add__(self, other: "CostBreakdown") -> "CostBreakdown":
        return CostBreakdown(self.purchasing + other.purchasing, self.holding + other.holding,
                             self.wastage + other.wastage, self.shortage + other.shortage,
                             self.transport + other.transport)


@dataclass(frozen=True)
class FeasibilityReport:
    c1: bool = True   # DC capacity
    c2: bool = True   # retailer capacity
    c3: bool = True   # DC single farm
    c4: bool = True   # retailer single DC
    c5: bool = True   # vehicle count
    c6: bool = True   # vehicle load

    @property
    def ok(self) -> bool:
        return self.c1 and self.c2 and self.c3 and self.c4 and self.c5 and self.c6

    def failed(self) -> list[str]:
        return [n for n in ("c1", "c2", "c3", "c4", "c5", "c6") if not getattr(self, n)]


@dataclass
class NodeLedger:
    """Per (node, product) flows and money for one period."""

    arrived: np.ndarray
    ordered: np.ndarray
    shipped: np.ndarray
    sold: np.ndarray
    demand: np.ndarray
    unmet: np.ndarray
    purged: np.ndarray
    decayed: np.ndarray
    handling_loss: np.ndarray
    revenue: np.ndarray
    purchasing: np.ndarray
    holding: np.ndarray
    wastage: np.ndarray
    shortage: np.ndarray
    transport: np.ndarray
    shortage_pipeline_netted: np.ndarray

    @classmethod
    def empty(cls, n: int, p: int) -> "NodeLedger":
        return cls(*(np.zeros((n, p)) for _ in range(16)))

    @property
    def wasted(self) -> np.ndarray:
        return self.purged + self.decayed + self.handling_loss

    def profit(self) -> np.ndarray:
        return self.revenue - self.purchasing - self.holding - self.wastage - self.shortage - self.transport

    def costs(self) -> CostBreakdown:
        return CostBreakdown(float(self.purchasing.sum()), float(self.holding.sum()), float(self.wastage.sum()),
                             float(self.shortage.sum()), float(self.transport.sum()))


@dataclass(frozen=True)
class StepResult:
    observation: Observation
    reward: float
    costs: CostBreakdown
    revenue: float
    done: bool
    feasibility: FeasibilityReport
    dc: NodeLedger
    retailers: NodeLedger
    dc_rewards: np.ndarray        # (K,) own profit, zeroed with reward in strict mode
    retailer_rewards: np.ndarray  # (C,)
    farm_profit: float = 0.0
    vehicles: dict = field(default_factory=dict)

    @property
    def fill_rate(self) -> float:
        d = float(self.retailers.demand.sum())
        return 1.0 if d <= 0 else float(self.retailers.sold.sum()) / d

    @property
    def wasted_units(self) -> float:
        return float(self.dc.wasted.sum() + self.retailers.wasted.sum())

    @property
    def unmet_demand(self) -> float:
        return float(self.retailers.unmet.sum())


@dataclass(frozen=True)
class InventoryState:
    dc_on_hand: np.ndarray
    retailer_on_hand: np.ndarray
    dc_capacity: np.ndarray
    retailer_capacity: np.ndarray


def take_oldest(stock: np.ndarray, qty: np.ndarray) -> np.ndarray:
    """Amounts removed per age bucket when ``qty`` leaves oldest-first.

    ``stock`` is ``(n, L)`` with ages ascending along axis 1.
    """
    cum = np.minimum(np.cumsum(stock[:, ::-1], axis=1), qty[:, None])
    taken = cum.copy()
    taken[:, 1:] -= cum[:, :-1]
    return np.minimum(taken[:, ::-1], stock)


def check_constraints(state: InventoryState, orders: Iterable[tuple], scenario: Scenario) -> FeasibilityReport:
    """Evaluate C1-C6 for a stock snapshot and a list of orders.

    ``orders`` holds ``(source, destination, product, quantity)`` with node
    names from the topology (farm -> DC or DC -> retailer).
    """
    topo = scenario.topology
    fleet = topo.fleet
    c1 = bool(np.all(state.dc_on_hand <= state.dc_capacity + 1e-9))
    c2 = bool(np.all(state.retailer_on_hand <= state.retailer_capacity + 1e-9))
    suppliers: dict = {}
    edge_qty: dict = {}
    for src, dst, _p, q in orders:
        if q <= 0:
            continue
        suppliers.setdefault(dst, set()).add(src)
        edge_qty[(src, dst)] = edge_qty.get((src, dst), 0.0) + float(q)
    c3 = all(len(suppliers.get(k, ())) <= 1 for k in topo.dcs)
    c4 = all(len(suppliers.get(c, ())) <= 1 for c in topo.retailers)
    per_source: dict = {}
    for (src, _dst), q in edge_qty.items():
        per_source[src] = per_source.get(src, 0) + vehicles_needed(q, fleet.vehicle_capacity)
    c5 = all(n <= fleet.vehicles for n in per_source.values())
    c6 = all(q / max(vehicles_needed(q, fleet.vehicle_capacity), 1) <= fleet.vehicle_capacity + 1e-9
             for q in edge_qty.values())
    return FeasibilityReport(c1, c2, c3, c4, c5, c6)


class SupplyChainEnv:
    """Farm -> DC -> retailer simulator with age-tracked perishable stock."""

    def __init__(self, scenario: Scenario, seed: int = 0, stream_id: int = 0, record_trace: bool = False):
        self.scenario = scenario
        self.stream_id = stream_id
        self.record_trace = record_trace
        topo = scenario.topology
        self.K, self.C, self.P = len(topo.dcs), len(topo.retailers), scenario.n_products
        self.shelf = np.array([p.shelf_life for p in scenario.products])
        # one slot past the longest shelf life so expiring stock is purged, not shifted off the end
        self.L = int(self.shelf.max()) + 1
        ages = np.arange(self.L)
        self._valid = ages[None, :] < self.shelf[:, None]              # (P, L)
        fresh = np.clip(1.0 - ages[None, :] / self.shelf[:, None], 0.0, 1.0)
        delta = np.array([p.delta for p in scenario.products])[:, None]
        mu = np.array([p.mu for p in scenario.products])[:, None]
        self._decay = np.where(self._valid, delta * np.exp(-mu * fresh), 0.0)  # (P, L)
        self.freshness_table = fresh

        def table(rows, attr):
            return np.array([[getattr(q, attr) for q in row] for row in rows], dtype=float)

        dp, rp = scenario.dc_params, scenario.retailer_params
        self.dc_cap, self.ret_cap = table(dp, "capacity"), table(rp, "capacity")
        self.dc_init, self.ret_init = table(dp, "initial"), table(rp, "initial")
        self.dc_price, self.ret_price = table(dp, "sale_price"), table(rp, "sale_price")
        self.dc_buy = table(dp, "purchase_price")
        self.ret_buy = self.dc_price[list(topo.retailer_dc)]
        self.dc_hold, self.ret_hold = table(dp, "holding"), table(rp, "holding")
        self.dc_short, self.ret_short = table(dp, "shortage"), table(rp, "shortage")
        self.dc_waste, self.ret_waste = table(dp, "wastage"), table(rp, "wastage")
        if scenario.fixed_cost_source == "node":
            self.dc_fixed, self.ret_fixed = table(dp, "fixed_order_price"), table(rp, "fixed_order_price")
        else:
            cf = np.array([p.fixed_ordering_cost for p in scenario.products])
            self.dc_fixed = np.tile(cf, (self.K, 1))
            self.ret_fixed = np.tile(cf, (self.C, 1))
        self.farm_prod_cost = np.array([p.farm_unit_production_cost for p in scenario.products])
        self.retailer_dc = np.array(topo.retailer_dc)
        self._lead_mean = {e: s.mean() for e, s in scenario.lead_times.edges.items()}
        self.trace: list[tuple] = []
        self.reset(seed)

    # --- state -------------------------------------------------------------

    def reset(self, seed: int | None = None) -> Observation:
        if seed is not None:
            self.seed = int(seed)
        self.rng = RngStream(self.seed, self.stream_id).generator
        self.t = 0
        self.dc_stock = np.zeros((self.K, self.P, self.L))
        self.ret_stock = np.zeros((self.C, self.P, self.L))
        self.dc_stock[:, :, 0] = self.dc_init
        self.ret_stock[:, :, 0] = self.ret_init
        self.dc_pipe = [deque() for _ in range(self.K)]
        self.ret_pipe = [deque() for _ in range(self.C)]
        self.demand_hist = [[deque(maxlen=self.scenario.demand_window) for _ in range(self.P)]
                            for _ in range(self.C)]
        self.dc_lead_est = np.array([self._lead_mean[dc_edge(k)] for k in range(self.K)])
        self.ret_lead_est = np.array([self._lead_mean[retailer_edge(c)] for c in range(self.C)])
        self.trace = []
        return self.observe()

    @property
    def dc_on_hand(self) -> np.ndarray:
        return self.dc_stock.sum(axis=2)

    @property
    def retailer_on_hand(self) -> np.ndarray:
        return self.ret_stock.sum(axis=2)

    @staticmethod
    def _pipe_totals(pipes, P) -> np.ndarray:
        out = np.zeros((len(pipes), P))
        for i, q in enumerate(pipes):
            for entry in q:
                out[i] += entry[0]
        return out

    def dc_pipeline(self) -> np.ndarray:
        return self._pipe_totals(self.dc_pipe, self.P)

    def retailer_pipeline(self) -> np.ndarray:
        return self._pipe_totals(self.ret_pipe, self.P)

    def inventory_state(self) -> InventoryState:
        return InventoryState(self.dc_on_hand, self.retailer_on_hand, self.dc_cap, self.ret_cap)

    def observe(self) -> Observation:
        dfc = np.array([[forecast_demand(self.demand_hist[c][p], self.scenario.demand_window)
                         for p in range(self.P)] for c in range(self.C)])
        return Observation(self.t, self.t % 7, self.retailer_on_hand, self.retailer_pipeline(),
                           self.ret_lead_est.copy(), dfc, self.dc_on_hand, self.dc_pipeline(),
                           self.dc_lead_est.copy(), self.ret_cap, self.dc_cap)

    # --- helpers -----------------------------------------------------------

    def _sample_lead(self, edge) -> int:
        spec = self.scenario.lead_times.edges[edge]
        return round_lead_time(spec.draw(self.rng), self.scenario.lead_times.floor)

    def _deliver(self, stock_row: np.ndarray, qty: np.ndarray, ledger: NodeLedger, i: int):
        loss = qty * self.scenario.handling_loss
        stock_row[:, 0] += qty - loss
        ledger.arrived[i] += qty - loss
        ledger.handling_loss[i] += loss

    def _arrivals(self, pipes, stocks, ledger, lead_est):
        s = self.scenario.lead_smoothing
        for i, q in enumerate(pipes):
            for entry in q:
                entry[1] -= 1
            while q and q[0][1] <= 0:
                qty, _, placed = q.popleft()
                self._deliver(stocks[i], qty, ledger, i)
                lead_est[i] = s * (self.t - placed) + (1.0 - s) * lead_est[i]

    def _fleet_clip(self, qty_rows: np.ndarray, groups: list[list[int]]) -> tuple[np.ndarray, dict]:
        """Greedy per-source vehicle allocation; rows of ``qty_rows`` are edges."""
        fleet = self.scenario.topology.fleet
        out = qty_rows.copy()
        used = {}
        for src, edges in enumerate(groups):
            left = fleet.vehicles
            for e in edges:
                q = out[e].sum()
                need = vehicles_needed(q, fleet.vehicle_capacity)
                give = min(need, left)
                if give < need:
                    out[e] *= give * fleet.vehicle_capacity / q
                left -= give
            used[src] = fleet.vehicles - left
        return out, used

    def _vehicle_counts(self, qty_rows: np.ndarray, groups: list[list[int]]) -> dict:
        cap = self.scenario.topology.fleet.vehicle_capacity
        return {src: sum(vehicles_needed(qty_rows[e].sum(), cap) for e in edges) for src, edges in enumerate(groups)}

    # --- dynamics ----------------------------------------------------------

    def step(self, action: Action) -> StepResult:
        sc = self.scenario
        topo = sc.topology
        fleet = topo.fleet
        K, C, P = self.K, self.C, self.P
        dco = np.asarray(action.dc_orders, dtype=float).reshape(K, P)
        rto = np.asarray(action.retailer_orders, dtype=float).reshape(C, P)
        if not (np.all(np.isfinite(dco)) and np.all(np.isfinite(rto))):
            raise ValueError("action contains non-finite order quantities")
        dco = np.maximum(dco, 0.0)
        rto = np.maximum(rto, 0.0)
        clip = sc.mode == "clip"
        dcl = NodeLedger.empty(K, P)
        rtl = NodeLedger.empty(C, P)

        # 1. arrivals
        self._arrivals(self.dc_pipe, self.dc_stock, dcl, self.dc_lead_est)
        self._arrivals(self.ret_pipe, self.ret_stock, rtl, self.ret_lead_est)

        # 2. order placement
        farm_groups = [topo.dcs_of(j) for j in range(len(topo.farms))]
        dc_groups = [topo.retailers_of(k) for k in range(K)]
        if clip:
            dco = np.minimum(dco, np.maximum(self.dc_cap - self.dc_on_hand - self.dc_pipeline(), 0.0))
            dco, farm_vehicles = self._fleet_clip(dco, farm_groups)
            rto = np.minimum(rto, np.maximum(self.ret_cap - self.retailer_on_hand - self.retailer_pipeline(), 0.0))
        else:
            farm_vehicles = self._vehicle_counts(dco, farm_groups)
        dcl.ordered[:] = dco
        rtl.ordered[:] = rto
        dcl.purchasing += dco * self.dc_buy + self.dc_fixed * (dco > 0)
        rtl.purchasing += self.ret_fixed * (rto > 0)
        dc_leads = [self._sample_lead(dc_edge(k)) for k in range(K)]
        for k in range(K):
            if dco[k].sum() > 0:
                if dc_leads[k] == 0:
                    self._deliver(self.dc_stock[k], dco[k], dcl, k)
                else:
                    self.dc_pipe[k].append([dco[k].copy(), dc_leads[k], self.t])

        # 3a. DC -> retailer shipments
        dc_avail = self.dc_on_hand
        dc_v = dc_avail.copy()
        ship = np.zeros((C, P))
        for k in range(K):
            rs = dc_groups[k]
            if not rs:
                continue
            req = rto[rs]
            tot = req.sum(axis=0)
            ratio = np.where(tot > dc_avail[k], dc_avail[k] / np.where(tot > 0, tot, 1.0), 1.0)
            ship[rs] = req * ratio
        if clip:
            ship, dc_vehicles = self._fleet_clip(ship, dc_groups)
        else:
            dc_vehicles = self._vehicle_counts(ship, dc_groups)
        for k in range(K):
            mask = self.retailer_dc == k
            dcl.shipped[k] = ship[mask].sum(axis=0)
            dcl.demand[k] = rto[mask].sum(axis=0)
        flat = self.dc_stock.reshape(K * P, self.L)
        flat -= take_oldest(flat, dcl.shipped.ravel())
        np.maximum(flat, 0.0, out=flat)
        dcl.unmet[:] = np.maximum(dcl.demand - dcl.shipped, 0.0)
        dcl.revenue += dcl.shipped * self.dc_price
        rtl.purchasing += ship * self.ret_buy
        ret_leads = [self._sample_lead(retailer_edge(c)) for c in range(C)]
        for c in range(C):
            if ship[c].sum() > 0:
                if ret_leads[c] == 0:
                    self._deliver(self.ret_stock[c], ship[c], rtl, c)
                else:
                    self.ret_pipe[c].append([ship[c].copy(), ret_leads[c], self.t])

        # peak on-hand for C1/C2 (after all of this period's deliveries)
        dc_peak = np.maximum(dc_v, self.dc_on_hand)
        ret_v = self.retailer_on_hand

        # 3b. customer demand, oldest stock first
        dow = self.t % 7
        demand = np.array([[max(0.0, sc.demand.spec(c, p, dow).draw(self.rng)) for p in range(P)]
                           for c in range(C)])
        sold = np.minimum(demand, ret_v)
        flat = self.ret_stock.reshape(C * P, self.L)
        flat -= take_oldest(flat, sold.ravel())
        np.maximum(flat, 0.0, out=flat)
        for c in range(C):
            for p in range(P):
                self.demand_hist[c][p].append(demand[c, p])
        rtl.demand[:] = demand
        rtl.sold[:] = sold
        rtl.unmet[:] = demand - sold
        rtl.revenue += sold * self.ret_price

        # 4. shortage
        dc_pipe = self.dc_pipeline()
        ret_pipe = self.retailer_pipeline()
        rtl.shortage += rtl.unmet * self.ret_short
        dcl.shortage += dcl.unmet * self.dc_short
        rtl.shortage_pipeline_netted[:] = np.maximum(demand - ret_v - ret_pipe, 0.0)
        dcl.shortage_pipeline_netted[:] = np.maximum(dcl.demand - dc_v - dc_pipe, 0.0)

        # 5. aging, purge, decay
        for stock, led, wcost in ((self.dc_stock, dcl, self.dc_waste), (self.ret_stock, rtl, self.ret_waste)):
            stock[:, :, 1:] = stock[:, :, :-1].copy()
            stock[:, :, 0] = 0.0
            expired = stock * ~self._valid[None]
            led.purged += expired.sum(axis=2)
            stock *= self._valid[None]
            loss = stock * self._decay[None]
            stock -= loss
            led.decayed += loss.sum(axis=2)
            led.wastage += led.wasted * wcost

        # 6. holding on {v + a - d}+
        rtl.holding += np.maximum(ret_v + ret_pipe - demand, 0.0) * self.ret_hold
        dcl.holding += np.maximum(dc_v + dc_pipe - dcl.demand, 0.0) * self.dc_hold

        # 7. transport, charged to the receiving node pro rata by product
        for k in range(K):
            q = dco[k].sum()
            if q > 0:
                cost = edge_transport_cost(q, topo.dist_farm_dc[k], fleet, fleet.fixed_cost_dc, sc.transport_mode)
                dcl.transport[k] += cost * dco[k] / q
        for c in range(C):
            q = ship[c].sum()
            if q > 0:
                cost = edge_transport_cost(q, topo.dist_dc_retailer[c], fleet, fleet.fixed_cost_retailer,
                                           sc.transport_mode)
                rtl.transport[c] += cost * ship[c] / q

        # 8. reward
        feas = FeasibilityReport(
            c1=bool(np.all(dc_peak <= self.dc_cap + 1e-9)),
            c2=bool(np.all(ret_v <= self.ret_cap + 1e-9)),
            c5=all(n <= fleet.vehicles for n in farm_vehicles.values())
            and all(n <= fleet.vehicles for n in dc_vehicles.values()))
        costs = dcl.costs() + rtl.costs()
        revenue = float(dcl.revenue.sum() + rtl.revenue.sum())
        dc_r = dcl.profit().sum(axis=1)
        rt_r = rtl.profit().sum(axis=1)
        reward = revenue - costs.total
        if not clip and not feas.ok:
            reward = 0.0
            dc_r = np.zeros_like(dc_r)
            rt_r = np.zeros_like(rt_r)
        farm_profit = float((dco * (self.dc_buy - self.farm_prod_cost[None, :])).sum())

        if self.record_trace:
            self._trace(dcl, rtl, dc_pipe, ret_pipe, zeroed=not clip and not feas.ok)
        self.t += 1
        return StepResult(self.observe(), float(reward), costs, revenue, self.t >= sc.horizon, feas,
                          dcl, rtl, dc_r, rt_r, farm_profit,
                          {"farm": farm_vehicles, "dc": dc_vehicles})

    def _trace(self, dcl, rtl, dc_pipe, ret_pipe, zeroed: bool):
        topo = self.scenario.topology
        for names, led, stock, pipe in ((topo.dcs, dcl, self.dc_stock, dc_pipe),
                                        (topo.retailers, rtl, self.ret_stock, ret_pipe)):
            on_hand = stock.sum(axis=2)
            profit = np.zeros((len(names), self.P)) if zeroed else led.profit()
            for i, name in enumerate(names):
                for p in range(self.P):
                    out = led.shipped[i, p] if names is topo.dcs else led.sold[i, p]
                    self.trace.append((self.t, name, p, on_hand[i, p], pipe[i, p], led.ordered[i, p],
                                       led.arrived[i, p], out, led.unmet[i, p], led.wasted[i, p],
                                       led.holding[i, p], led.shortage[i, p], led.wastage[i, p],
                                       led.transport[i, p], profit[i, p]))

    def write_trace(self, path) -> None:
        write_trace_csv(self.trace, path)


def write_trace_csv(rows: Sequence[tuple], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])
