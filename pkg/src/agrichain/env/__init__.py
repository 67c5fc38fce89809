"""Supply chain environment: scenario description, cost model, simulator."""

from .core import (TRACE_COLUMNS, Action, CostBreakdown, FeasibilityReport, InventoryState, NodeLedger,
                   Observation, StepResult, SupplyChainEnv, check_constraints, take_oldest, write_trace_csv)
from .costs import (edge_transport_cost, episode_return, holding_quantity, shortage_quantity, transport_cost,
                    vehicles_needed, wastage_decay_fraction)
from .scenario import (FleetSpec, NetworkTopology, NodeProductParams, ProductSpec, Scenario, ScenarioError,
                       dc_edge, retailer_edge)

__all__ = [
    "TRACE_COLUMNS", "Action", "CostBreakdown", "FeasibilityReport", "InventoryState", "NodeLedger",
    "Observation", "StepResult", "SupplyChainEnv", "check_constraints", "take_oldest", "write_trace_csv",
    "edge_transport_cost", "episode_return", "holding_quantity", "shortage_quantity", "transport_cost",
    "vehicles_needed", "wastage_decay_fraction", "FleetSpec", "NetworkTopology", "NodeProductParams",
    "ProductSpec", "Scenario", "ScenarioError", "dc_edge", "retailer_edge",
]
