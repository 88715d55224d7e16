"""Profit sharing among content providers and assisting peers."""

from .dynamics import build_graph, enumerate_partitions, recurrence, successor, trajectory
from .expr import CostCurve, parse
from .fluid import FluidCost, FluidModel, QuadratureConfig, fluid_ad, fluid_chi, m_omega
from .game import (
    Partition,
    PayoffVector,
    Player,
    Role,
    ValueKind,
    WorthFunction,
    ad_value,
    blocking_coalitions,
    chi_value,
    core_violations,
    shapley,
    value,
)
from .peer_worth import PeerGameSpec, build_worth_function, coalescent_worth, hat_worth

__version__ = "0.1.0"
