"""Content freshness in a delay-tolerant network.

A provider pushes updates at rate ``mu`` to a fraction ``x`` of users who
then relay them at meeting rate ``lambda``. The provider picks the cheapest
rate whose expected content age stays within a budget ``g``; that cost, as a
function of ``x``, is the provider's cost curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .expr import CostCurve, parse
from .fluid import FluidCost, FluidModel, QuadratureConfig, SplitResult, peer_split_equilibrium
from .numerics import golden_section

__all__ = [
    "DtnParams",
    "ScenarioReport",
    "expected_age",
    "outage_probability",
    "optimal_rate",
    "numeric_rate",
    "cost_curve",
    "cost_table",
    "scenario",
]


@dataclass(frozen=True)
class DtnParams:
    name: str
    lam: float
    g: float
    x0: float = 0.0
    g_max: float | None = None

    def __post_init__(self) -> None:
        if not self.lam > 0 or not self.g > 0:
            raise ValueError("meeting rate and age budget must be positive")
        if self.g_max is not None and not self.g_max > 0:
            raise ValueError("outage threshold must be positive")
        if not 0.0 <= self.x0 <= 1.0:
            raise ValueError("subscribing fraction must lie in [0, 1]")


def _check(x: float, mu: float) -> None:
    if not x > 0:
        raise ValueError("no assisting users (x must be positive)")
    if not mu > 0:
        raise ValueError("push rate must be positive")


def expected_age(x: float, mu: float, lam: float) -> float:
    _check(x, mu)
    a = x * lam
    return math.log1p(a / mu) / a


def outage_probability(x: float, mu: float, lam: float, g_max: float) -> float:
    """Probability that a user's copy is older than ``g_max``."""
    _check(x, mu)
    if g_max < 0:
        raise ValueError("outage threshold must be nonnegative")
    a = x * lam
    # (a + mu) / (a + mu e^{(mu + a) g_max}), rewritten to avoid overflow
    t = (mu + a) * g_max
    if t > 700:
        return (a + mu) / mu * math.exp(-t) / (1 + a / mu * math.exp(-t))
    return (a + mu) / (a + mu * math.exp(t))


def optimal_rate(x: float, lam: float, g: float) -> float:
    """Least push rate meeting the age budget; the budget then binds."""
    if not x > 0:
        raise ValueError("no assisting users (x must be positive)")
    a = x * lam
    return a / math.expm1(a * g)


def numeric_rate(x: float, lam: float, g: float, rel_tol: float = 1e-13) -> float:
    """Same rate found by searching ``mu`` for the cheapest feasible push."""
    if not x > 0:
        raise ValueError("no assisting users (x must be positive)")

    def feasible(mu: float) -> bool:
        return expected_age(x, mu, lam) <= g

    hi = 1.0
    while not feasible(hi):
        hi *= 2.0
    lo = 0.0

    def cost(mu: float) -> float:
        return x * mu if mu > 0 and feasible(mu) else math.inf

    mu, _ = golden_section(cost, lo, hi, tol=rel_tol * hi)
    # golden search stops inside the final bracket; step to its feasible edge
    while not feasible(mu):
        mu += rel_tol * hi
    return mu


def cost_curve(params: DtnParams) -> CostCurve:
    """``x -> x^2 lambda / (e^{x lambda g} - 1)``, worth 0 at ``x = 0``."""
    curve = parse(
        "x^2*lam/(exp(x*lam*g)-1)",
        {"lam": params.lam, "g": params.g},
        validate=False,
    )
    return curve.with_limit(0.0, 0.0)


def cost_table(p: DtnParams, q: DtnParams, points: int = 101) -> str:
    """CSV with columns ``x,cost_p,cost_q``."""
    cp, cq = cost_curve(p), cost_curve(q)
    rows = ["x,cost_p,cost_q"]
    for k in range(points):
        x = k / (points - 1)
        rows.append(f"{x:.6g},{cp(x):.10g},{cq(x):.10g}")
    return "\n".join(rows) + "\n"


def _free_cost(params: DtnParams, free: float) -> CostCurve:
    # cost per unit of the free user mass, as a function of the share of it
    # taken; per-user payoffs are unchanged by this rescaling
    return parse(
        "(F*x+x0)^2/(exp((F*x+x0)*lam*g)-1)/F",
        {"F": free, "x0": params.x0, "lam": params.lam, "g": params.g},
        validate=False,
    )


@dataclass
class ScenarioReport:
    kind: str
    free: float
    allocation: dict[str, float]
    split: SplitResult
    peer_payoff: float
    provider_payoffs: dict[str, float]

    def lines(self) -> list[str]:
        out = [f"value: {self.kind}", f"free fraction: {self.free:.6g}"]
        for name, share in self.allocation.items():
            out.append(f"allocation {name}: {share:.6g}")
        out.append(f"monopoly: {self.split.monopoly or 'none'}")
        out.append(f"per-peer payoff: {self.peer_payoff:.10g}")
        for name, pay in self.provider_payoffs.items():
            out.append(f"provider payoff {name}: {pay:.10g}")
        return out


def scenario(
    p: DtnParams,
    q: DtnParams,
    kind: Literal["ad", "chi"] = "ad",
    weights: dict[str, float] | None = None,
    cfg: QuadratureConfig | None = None,
) -> ScenarioReport:
    """Split of the users not yet subscribed between two providers.

    Each provider already holds ``x0`` of the users; the rest choose the
    provider paying them more per user.
    """
    if p.name == q.name:
        raise ValueError("providers need distinct names")
    free = 1.0 - p.x0 - q.x0
    if not free > 1e-12:
        raise ValueError("no free users: subscribing fractions sum to 1")
    model = FluidModel(
        [FluidCost(p.name, _free_cost(p, free)), FluidCost(q.name, _free_cost(q, free))], cfg
    )
    split = peer_split_equilibrium(model, p.name, q.name, kind=kind, weights=weights)
    share = split.x
    if kind == "ad":
        pay_p, pay_q = model.ad([p.name], share), model.ad([q.name], 1.0 - share)
    else:
        pay_p = model.chi([p.name], share, weights)
        pay_q = model.chi([q.name], 1.0 - share, weights)
    peer = pay_p.peer if share > 0 else pay_q.peer
    return ScenarioReport(
        kind,
        free,
        {p.name: free * share, q.name: free * (1.0 - share)},
        split,
        peer,
        {p.name: free * pay_p.providers[p.name], q.name: free * pay_q.providers[q.name]},
    )
