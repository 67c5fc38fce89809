"""Closed-form pieces of the cost model."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

from .scenario import FleetSpec, NetworkTopology


def holding_quantity(on_hand: float, open_orders: float, demand: float) -> float:
    """{v + a - d}+"""
    return max(on_hand + open_orders - demand, 0.0)


def shortage_quantity(demand: float, on_hand: float, open_orders: float) -> float:
    """{d - v - a}+"""
    return max(demand - on_hand - open_orders, 0.0)


def wastage_decay_fraction(delta_p: float, mu_p: float, freshness: float) -> float:
    """Fraction of a bucket lost per period: delta_p * exp(-mu_p * F)."""
    return delta_p * math.exp(-mu_p * freshness)


def vehicles_needed(quantity: float, vehicle_capacity: float) -> int:
    if quantity <= 0:
        return 0
    return int(math.ceil(quantity / vehicle_capacity - 1e-12))


def edge_transport_cost(quantity: float, distance: float, fleet: FleetSpec, fixed: float,
                        mode: str = "literal") -> float:
    """Cost of one dispatch along an edge; an empty dispatch costs nothing.

    ``literal``: (q / Q_m) * (loading + unloading) * dist * fuel * N + fixed.
    ``per_vehicle``: N * (fuel * dist + loading + unloading) + fixed.
    """
    n = vehicles_needed(quantity, fleet.vehicle_capacity)
    if n == 0:
        return 0.0
    handling = fleet.loading_cost + fleet.unloading_cost
    if mode == "literal":
        return (quantity / fleet.vehicle_capacity) * handling * distance * fleet.fuel_cost * n + fixed
    if mode == "per_vehicle":
        return n * (fleet.fuel_cost * distance + handling) + fixed
    raise ValueError(f"unknown transport mode {mode!r}")


def transport_cost(shipments: Iterable[tuple], topology: NetworkTopology, mode: str = "literal") -> float:
    """Total cost for ``(edge, product, quantity)`` shipments.

    Edges are ``("dc", k)`` for farm -> DC k and ``("retailer", c)`` for
    DC -> retailer c.  Products on the same edge share vehicles.
    """
    per_edge: dict = {}
    for edge, _product, q in shipments:
        per_edge[edge] = per_edge.get(edge, 0.0) + float(q)
    fleet = topology.fleet
    total = 0.0
    for (kind, idx), q in per_edge.items():
        if kind == "dc":
            total += edge_transport_cost(q, topology.dist_farm_dc[idx], fleet, fleet.fixed_cost_dc, mode)
        elif kind == "retailer":
            total += edge_transport_cost(q, topology.dist_dc_retailer[idx], fleet, fleet.fixed_cost_retailer, mode)
        else:
            raise ValueError(f"unknown edge kind {kind!r}")
    return total


def episode_return(step_rewards: Sequence[float], gamma: float | None = None) -> float:
    """Plain sum of rewards, or the discounted sum when ``gamma`` is given."""
    if gamma is None:
        return float(sum(step_rewards))
    total, g = 0.0, 1.0
    for r in step_rewards:
        total += g * r
        g *= gamma
    return total
