"""Fault-resilient network-on-chip modelling: distributed cut-element
detection, turn-prohibition reconfiguration, a flit-level router model and
Monte Carlo campaigns."""

from .reconfig import (
    TurnTables,
    build_cdg,
    build_routing_tables,
    fashion_reconfigure,
    find_dependency_cycle,
    updown_reconfigure,
)
from .router import Network, RouterConfig
from .sam import run_search, survey
from .sim import TrafficPattern, connectivity_campaign, run_simulation
from .topo import FaultModel, Mode, build_graph, build_mesh, build_torus, effective_graph, inject_faults

__version__ = "0.1.0"

__all__ = [
    "FaultModel",
    "Mode",
    "Network",
    "RouterConfig",
    "TrafficPattern",
    "TurnTables",
    "build_cdg",
    "build_graph",
    "build_mesh",
    "build_routing_tables",
    "build_torus",
    "connectivity_campaign",
    "effective_graph",
    "fashion_reconfigure",
    "find_dependency_cycle",
    "inject_faults",
    "run_search",
    "run_simulation",
    "survey",
    "updown_reconfigure",
]
