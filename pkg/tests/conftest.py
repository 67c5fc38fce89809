import numpy as np
import pytest

from agrichain.env import (FleetSpec, NetworkTopology, NodeProductParams, ProductSpec, Scenario, dc_edge,
                           retailer_edge)
from agrichain.harness.config import load_builtin
from agrichain.stochastic import DemandModel, DistributionSpec, LeadTimeModel


@pytest.fixture(scope="session")
def default_config():
    return load_builtin("default")


@pytest.fixture(scope="session")
def default_scenario(default_config):
    return default_config.scenario


def tiny_scenario(demand=("deterministic", 2.0), lead=("deterministic", 1.0), horizon=10, n_retailers=1,
                  shelf_life=5, delta=0.0, mu=1.0, dc_initial=50.0, ret_initial=5.0, dc_cap=100.0, ret_cap=20.0,
                  zero_costs=False, **kw) -> Scenario:
    """One farm, one DC, ``n_retailers`` retailers, one product."""
    fleet = FleetSpec(vehicles=10, vehicle_capacity=1000.0, loading_cost=0.0 if zero_costs else 1.0,
                      unloading_cost=0.0 if zero_costs else 1.0, fuel_cost=0.0 if zero_costs else 1.0,
                      fixed_cost_dc=0.0 if zero_costs else 2.0, fixed_cost_retailer=0.0 if zero_costs else 2.0)
    topo = NetworkTopology(("F",), ("D",), tuple(f"R{c}" for c in range(n_retailers)), (0,), (0,) * n_retailers,
                           (5.0,), (1.0,) * n_retailers, fleet)
    prod = ProductSpec("p", delta=delta, mu=mu, shelf_life=shelf_life,
                       farm_unit_production_cost=0.0 if zero_costs else 1.0,
                       fixed_ordering_cost=0.0 if zero_costs else 3.0)
    c = 0.0 if zero_costs else 1.0
    dcp = NodeProductParams(initial=dc_initial, capacity=dc_cap, sale_price=4.0 * c, holding=0.1 * c,
                            shortage=0.2 * c, wastage=0.3 * c, purchase_price=2.0 * c)
    rp = NodeProductParams(initial=ret_initial, capacity=ret_cap, sale_price=10.0, holding=0.5 * c,
                           shortage=1.0 * c, wastage=0.5 * c)
    spec = DistributionSpec.parse(list(demand))
    sched = {(r, 0): (spec,) * 7 for r in range(n_retailers)}
    lspec = DistributionSpec.parse(list(lead))
    edges = {dc_edge(0): lspec, **{retailer_edge(r): lspec for r in range(n_retailers)}}
    floor = kw.pop("floor", 1)
    return Scenario(topo, (prod,), ((dcp,),), ((rp,),) * n_retailers, DemandModel(sched),
                    LeadTimeModel(edges, floor), horizon=horizon, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance report --------------------------------------------------------

ACCEPTANCE: dict = {}


def record(number: int, name: str, passed: bool, detail: str = "") -> str:
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
