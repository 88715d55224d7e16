"""Per-peer payoffs in the many-peer limit.

Costs are normalized per peer and live on ``[0, 1]``: ``curve(x)`` is a
provider's cost when a fraction ``x`` of all peers assists it. The minimal
joint cost of a provider set ``S`` sharing a fraction ``x`` is written
``M^S(x)``; Aumann-Drèze payoffs are integrals over ``u in [0, 1]`` of
differences of ``M`` along the ray ``u * x``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .expr import CostCurve, ExprDomainError
from .game import CapacityError, GameStructureError
from .numerics import adaptive_simpson, golden_section

__all__ = [
    "FluidCost",
    "FluidPayoff",
    "FluidModel",
    "QuadratureConfig",
    "SplitResult",
    "m_omega",
    "fluid_ad",
    "fluid_chi",
    "noncontributing_providers",
    "peer_split_equilibrium",
    "fair_identity_residual",
    "core_violation_margin",
    "efficiency_residual",
    "chi_surplus_threshold",
]

MAX_JOINT = 3
MAX_STARTS = 4  # local grid minima refined per joint minimization
VALIDATION_POINTS = 2001
IBP_MIN_X = 1e-3  # below this, slope integrals use dM directly


@dataclass(frozen=True)
class QuadratureConfig:
    tol: float = 1e-9
    max_depth: int = 50
    step: float = 1e-6  # finite-difference step for dM/dx
    payoff_step: float = 1e-3  # step for derivatives of quadrature outputs
    seeds: int = 8
    grid: int = 65  # coarse points per dimension in the M minimization

    def __post_init__(self) -> None:
        if not self.tol > 0 or not self.step > 0 or not self.payoff_step > 0:
            raise ValueError("tolerance and steps must be positive")
        if self.max_depth < 1 or self.seeds < 1 or self.grid < 3:
            raise ValueError("depth, seeds and grid must be positive (grid >= 3)")


class FluidCost:
    """A provider's normalized cost curve on ``[0, 1]``.

    ``curve`` may be a :class:`CostCurve` or any float callable. Curves that
    rise somewhere are accepted with a warning; minimizations then use the
    running minimum, since a provider can always leave assisting peers idle.
    """

    def __init__(self, provider: str, curve: Callable[[float], float]):
        self.provider = provider
        self.curve = curve
        xs = np.linspace(0.0, 1.0, VALIDATION_POINTS)
        ys = self.many(xs)
        if not np.all(np.isfinite(ys)):
            bad = xs[~np.isfinite(ys)][0]
            raise ExprDomainError(f"cost of {provider!r} is not finite at x={bad:.6g}")
        if np.any(ys < -1e-12):
            raise GameStructureError(f"cost of {provider!r} is negative somewhere on [0, 1]")
        if np.ptp(ys) == 0:
            raise GameStructureError(f"cost of {provider!r} is constant on [0, 1]")
        self.monotone = bool(np.all(np.diff(ys) <= 1e-12))
        if not self.monotone:
            warnings.warn(f"cost of {provider!r} is not nonincreasing", stacklevel=2)
        self._xs = xs
        self._runmin = np.minimum.accumulate(ys)
        self.at_zero = float(ys[0])

    def __repr__(self) -> str:
        return f"FluidCost({self.provider!r}, {self.curve!r})"

    def __call__(self, x: float) -> float:
        return float(self.curve(x))

    def many(self, xs: np.ndarray) -> np.ndarray:
        if isinstance(self.curve, CostCurve):
            return self.curve.many(xs)
        return np.array([float(self.curve(float(x))) for x in np.ravel(xs)]).reshape(
            np.shape(xs)
        )

    def right_slope(self, y: float) -> float | None:
        """Closed-form slope of the envelope at an end point, if known."""
        if not isinstance(self.curve, CostCurve):
            return None
        try:
            v = self.curve.slope(y)
        except ExprDomainError:
            return None
        if not math.isfinite(v):
            return None
        return v if self.monotone else min(v, 0.0)

    def envelope(self, y: float) -> float:
        """``min_{z <= y} curve(z)``, exact for nonincreasing curves."""
        y = min(max(y, 0.0), 1.0)
        val = float(self.curve(y))
        if self.monotone:
            return val
        k = int(np.searchsorted(self._xs, y, side="right")) - 1
        return min(val, float(self._runmin[k]))

    def envelope_many(self, ys: np.ndarray) -> np.ndarray:
        ys = np.clip(ys, 0.0, 1.0)
        vals = self.many(ys)
        if self.monotone:
            return vals
        k = np.searchsorted(self._xs, ys, side="right") - 1
        return np.minimum(vals, self._runmin[k])


@dataclass
class FluidPayoff:
    """Payoff of each provider in a coalition and of each of its peers."""

    providers: dict[str, float]
    peer: float
    x: float
    kind: str = "ad"

    def total(self) -> float:
        return sum(self.providers.values()) + self.x * self.peer


@dataclass
class SplitResult:
    """Outcome of peers choosing between two single-provider coalitions.

    ``x`` is the fraction of peers assisting the first provider. ``monopoly``
    names the provider holding every peer, if any. ``crossings`` lists every
    bracketed point where the two peer payoffs are equal and ``stable``
    those crossings that attract nearby splits.
    """

    x: float
    monopoly: str | None
    crossings: list[float] = field(default_factory=list)
    stable: list[float] = field(default_factory=list)
    indifferent: bool = False


class FluidModel:
    """A set of provider costs with caches for ``M`` and payoff evaluations."""

    def __init__(
        self,
        costs: Iterable[FluidCost] | Mapping[str, Callable[[float], float]],
        cfg: QuadratureConfig | None = None,
    ):
        if isinstance(costs, Mapping):
            costs = [c if isinstance(c, FluidCost) else FluidCost(k, c) for k, c in costs.items()]
        self.costs: dict[str, FluidCost] = {}
        for c in costs:
            if c.provider in self.costs:
                raise GameStructureError(f"duplicate provider {c.provider!r}")
            self.costs[c.provider] = c
        if not self.costs:
            raise GameStructureError("at least one provider is required")
        self.cfg = cfg or QuadratureConfig()
        self.order = {name: k for k, name in enumerate(self.costs)}
        self._m_cache: dict[tuple[tuple[str, ...], float], float] = {}
        self._ad_cache: dict = {}

    @property
    def providers(self) -> tuple[str, ...]:
        return tuple(self.costs)

    def key(self, names: Iterable[str]) -> tuple[str, ...]:
        names = set(names)
        unknown = names - set(self.costs)
        if unknown:
            raise GameStructureError(f"unknown provider {sorted(unknown)[0]!r}")
        return tuple(sorted(names, key=self.order.__getitem__))

    # -- joint minimal cost ------------------------------------------------

    def m(self, names: Iterable[str], x: float) -> float:
        """``M^S(x)``: least total cost of ``S`` sharing a peer fraction ``x``."""
        s = self.key(names)
        if not -1e-12 <= x <= 1 + 1e-12:
            raise ValueError(f"peer fraction {x!r} outside [0, 1]")
        x = min(max(x, 0.0), 1.0)
        hit = self._m_cache.get((s, x))
        if hit is None:
            hit = self._m(s, x)
            if not math.isfinite(hit):
                raise ExprDomainError(f"joint cost of {s} is not finite at x={x!r}")
            self._m_cache[(s, x)] = hit
        return hit

    def _m(self, s: tuple[str, ...], x: float) -> float:
        if not s:
            return 0.0
        if len(s) > MAX_JOINT:
            raise CapacityError(f"joint minimization supports at most {MAX_JOINT} providers")
        c = [self.costs[n] for n in s]
        if len(s) == 1:
            return c[0].envelope(x)
        if x == 0.0:
            return sum(ci.at_zero for ci in c)
        if len(s) == 2:
            return self._m2(c[0], c[1], x)
        return self._m3(s, c, x)

    def _m2(self, a: FluidCost, b: FluidCost, x: float) -> float:
        g = self.cfg.grid
        ys = np.linspace(0.0, x, g)
        vals = a.envelope_many(ys) + b.envelope_many(x - ys)
        padded = np.concatenate(([np.inf], vals, [np.inf]))
        local = np.flatnonzero((vals <= padded[:-2]) & (vals <= padded[2:]))
        # every basin is refined, not just the best grid point's: where the
        # optimum switches basins the grid error would otherwise show as a jump
        best = float(vals.min())
        for k in local[np.argsort(vals[local])][:MAX_STARTS]:
            lo, hi = ys[max(k - 1, 0)], ys[min(k + 1, g - 1)]
            _, y = golden_section(lambda t: a.envelope(t) + b.envelope(x - t), lo, hi, 1e-11)
            best = min(best, y)
        # the budget endpoints are exact candidates
        return min(best, a.envelope(x) + b.at_zero, a.at_zero + b.envelope(x))

    def _m3(self, s: tuple[str, ...], c: list[FluidCost], x: float) -> float:
        # best over each edge of the simplex (one provider idle) ...
        best = min(
            self.m([s[j], s[k]], x) + c[i].at_zero
            for i, j, k in ((0, 1, 2), (1, 0, 2), (2, 0, 1))
        )
        # ... and over its interior, seeded from a triangular grid
        g = self.cfg.grid
        i, j = np.meshgrid(np.arange(g), np.arange(g), indexing="ij")
        keep = i + j <= g - 1
        y1, y2 = x * i[keep] / (g - 1), x * j[keep] / (g - 1)
        y3 = np.clip(x - y1 - y2, 0.0, None)
        vals = c[0].envelope_many(y1) + c[1].envelope_many(y2) + c[2].envelope_many(y3)
        best = min(best, float(vals.min()))
        if x == 0:
            return best
        # discrete local minima of the triangular grid; neighbors move one
        # step between any two of the three shares
        grid = np.full((g, g), np.inf)
        grid[i[keep], j[keep]] = vals
        padded = np.pad(grid, 1, constant_values=np.inf)
        inner = padded[1:-1, 1:-1]
        local = np.ones_like(inner, dtype=bool)
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)):
            local &= inner <= padded[1 + di : g + 1 + di, 1 + dj : g + 1 + dj]
        li, lj = np.nonzero(local & np.isfinite(inner))
        order = np.argsort(grid[li, lj])[:MAX_STARTS]

        def f(z: np.ndarray) -> float:
            return sum(ci.envelope(zi) for ci, zi in zip(c, z))

        # all three shares stay explicit: clipping a derived third share puts
        # a kink into finite-difference gradients at the edge, and the
        # optimizer then stops at edge points that are not optimal
        jac = None
        if all(ci.monotone and isinstance(ci.curve, CostCurve) for ci in c):

            def jac(z: np.ndarray) -> np.ndarray:
                out = np.empty(3)
                for n, (ci, zi) in enumerate(zip(c, z)):
                    zi = min(max(zi, 0.0), 1.0)
                    try:
                        out[n] = ci.curve.slope(zi)
                    except ExprDomainError:
                        h = 1e-7 if zi < 0.5 else -1e-7
                        out[n] = (ci(zi + h) - ci(zi)) / h
                return out

        # refine even from edge points: an optimum whose smallest share is
        # below one grid step sits next to the edge and is otherwise missed
        nudge = x / (g - 1) / 4
        for n in order:
            start = np.array([li[n], lj[n], g - 1 - li[n] - lj[n]], dtype=float) * x / (g - 1)
            start = np.maximum(start, nudge)
            start *= x / start.sum()
            res = minimize(
                f,
                start,
                jac=jac,
                method="SLSQP",
                bounds=[(0.0, x)] * 3,
                constraints=[{"type": "eq", "fun": lambda z: z.sum() - x, "jac": lambda z: np.ones(3)}],
                options={"ftol": 1e-15, "maxiter": 200},
            )
            z = np.clip(res.x, 0.0, x)
            if np.all(np.isfinite(z)) and abs(z.sum() - x) <= 1e-12:
                best = min(best, float(f(z)))
        return best

    def dm(self, names: Iterable[str], y: float) -> float:
        """Derivative of ``M^S`` at ``y``.

        A single provider with a nonincreasing expression curve uses the
        curve's exact slope. At ``y = 0`` the right slope is the steepest
        provider slope, in closed form when every curve allows it. Otherwise
        a central difference with step ``cfg.step``, switching to a
        second-order one-sided stencil of the same step when the central one
        would leave ``[0, 1]``; the step is never shrunk, since roundoff in
        ``M`` divided by a tiny step would swamp the quadrature tolerance.
        """
        s = self.key(names)
        if not s:
            return 0.0
        if len(s) == 1 and self.costs[s[0]].monotone:
            v = self.costs[s[0]].right_slope(y)
            if v is not None:
                return v
        if y <= 0.0:
            slopes = [self.costs[n].right_slope(0.0) for n in s]
            if all(v is not None for v in slopes):
                return min(slopes)
        h = self.cfg.step
        if y - h >= 0.0 and y + h <= 1.0:
            return (self.m(s, y + h) - self.m(s, y - h)) / (2 * h)
        if y + 2 * h <= 1.0:
            return (-3 * self.m(s, y) + 4 * self.m(s, y + h) - self.m(s, y + 2 * h)) / (2 * h)
        return (3 * self.m(s, y) - 4 * self.m(s, y - h) + self.m(s, y - 2 * h)) / (2 * h)

    # -- Aumann-Drèze payoffs ------------------------------------------------

    def _integrate(self, f: Callable[[float], float], tol: float) -> float:
        cfg = self.cfg
        return adaptive_simpson(f, 0.0, 1.0, tol, cfg.max_depth, cfg.seeds)

    def _slope_integral(
        self, g: Callable[[float], float], dg: Callable[[float], float], a: int, b: int, x: float, tol: float
    ) -> float:
        """``int_0^1 u^a (1-u)^b g'(u x) du`` for ``a >= 1``.

        Away from ``x = 0`` this integrates by parts so the integrand needs
        only ``g``: finite-difference noise in ``g'`` for joint minima sits
        far above the quadrature tolerance and would make the adaptive rule
        subdivide without end. Near ``x = 0`` the ``1/x`` factor would
        amplify errors instead, so ``dg`` is integrated directly.
        """
        if x < IBP_MIN_X:
            return self._integrate(lambda u: u**a * (1 - u) ** b * dg(u * x), tol)
        g0 = g(0.0)

        def h(u: float) -> float:
            dw = a * u ** (a - 1) * (1 - u) ** b
            if b:
                dw -= b * u**a * (1 - u) ** (b - 1)
            return dw * (g(u * x) - g0)

        edge = g(x) - g0 if b == 0 else 0.0
        return (edge - self._integrate(h, tol * x)) / x

    def provider_ad(self, coalition: Iterable[str], p: str, x: float) -> float:
        zbar = self.key(coalition)
        if p not in zbar:
            raise GameStructureError(f"{p!r} is not in the coalition")
        key = ("p", zbar, p, x)
        if key in self._ad_cache:
            return self._ad_cache[key]
        others = [n for n in zbar if n != p]
        k = len(zbar)
        terms = [frozenset(t) for r in range(len(others) + 1) for t in combinations(others, r)]
        tol = self.cfg.tol / len(terms)
        out = self.costs[p].at_zero
        if x > 0:
            for t in terms:
                a = len(t)
                with_p = tuple(t | {p})

                def f(u, t=t, a=a, with_p=with_p):
                    w = u**a * (1 - u) ** (k - 1 - a)
                    return w * (self.m(with_p, u * x) - self.m(t, u * x))

                out -= self._integrate(f, tol)
        else:
            # M^{S+p}(0) - M^S(0) = curve_p(0) and the weights integrate to 1
            out = 0.0
        self._ad_cache[key] = out
        return out

    def provider_slope(self, coalition: Iterable[str], p: str, x: float) -> float:
        """``d/dx`` of :meth:`provider_ad`, differentiated under the integral.

        Each term ``M(u x)`` contributes ``u M'(u x)``, so the slope is again
        a set of weighted integrals of ``dM`` and stays accurate at ``x = 0``
        where curves such as ``x^1.5`` defeat finite differences.
        """
        zbar = self.key(coalition)
        if p not in zbar:
            raise GameStructureError(f"{p!r} is not in the coalition")
        others = [n for n in zbar if n != p]
        k = len(zbar)
        terms = [frozenset(t) for r in range(len(others) + 1) for t in combinations(others, r)]
        tol = self.cfg.tol / len(terms)
        out = 0.0
        for t in terms:
            a = len(t)
            with_p = tuple(t | {p})

            def g(y, t=t, with_p=with_p):
                return self.m(with_p, y) - self.m(t, y)

            def dg(y, t=t, with_p=with_p):
                return self.dm(with_p, y) - self.dm(t, y)

            out -= self._slope_integral(g, dg, a + 1, k - 1 - a, x, tol)
        return out

    def peer_ad(self, coalition: Iterable[str], x: float) -> float:
        zbar = self.key(coalition)
        if not zbar:
            return 0.0
        key = ("n", zbar, x)
        if key in self._ad_cache:
            return self._ad_cache[key]
        k = len(zbar)
        terms = [t for r in range(k + 1) for t in combinations(zbar, r)]
        tol = self.cfg.tol / len(terms)
        out = 0.0
        for t in terms:
            if not t:
                continue  # M of the empty set is flat
            a = len(t)

            def g(y, t=t):
                return self.m(t, y)

            def dg(y, t=t):
                return self.dm(t, y)

            out -= self._slope_integral(g, dg, a, k - a, x, tol)
        self._ad_cache[key] = out
        return out

    def ad(self, coalition: Iterable[str], x: float) -> FluidPayoff:
        zbar = self.key(coalition)
        return FluidPayoff(
            {p: self.provider_ad(zbar, p, x) for p in zbar}, self.peer_ad(zbar, x), x, "ad"
        )

    def shapley(self) -> FluidPayoff:
        """Fluid Shapley payoffs: the A-D payoffs of the grand coalition."""
        return self.ad(self.providers, 1.0)

    # -- chi payoffs ---------------------------------------------------------

    def chi(
        self, coalition: Iterable[str], x: float, weights: Mapping[str, float] | None = None
    ) -> FluidPayoff:
        zbar = self.key(coalition)
        weights = dict(weights or {})
        w = {p: float(weights.get(p, 1.0)) for p in zbar}
        if any(not v > 0 for v in w.values()):
            raise ValueError("provider weights must be positive")
        phi = self.shapley()
        if not zbar:
            return FluidPayoff({}, phi.peer, x, "chi")
        surplus = self.worth(zbar, x) - (x * phi.peer + sum(phi.providers[p] for p in zbar))
        scale = surplus / (x + sum(w.values()))
        return FluidPayoff(
            {p: phi.providers[p] + w[p] * scale for p in zbar}, phi.peer + scale, x, "chi"
        )

    def worth(self, coalition: Iterable[str], x: float) -> float:
        zbar = self.key(coalition)
        return sum(self.costs[p].at_zero for p in zbar) - self.m(zbar, x)


def _model(costs, cfg: QuadratureConfig | None = None) -> FluidModel:
    if isinstance(costs, FluidModel):
        if cfg is not None and cfg != costs.cfg:
            return FluidModel(costs.costs.values(), cfg)
        return costs
    return FluidModel(costs, cfg)


def m_omega(costs, s: Iterable[str], x: float) -> float:
    return _model(costs).m(s, x)


def fluid_ad(costs, providers: Iterable[str], x: float, cfg: QuadratureConfig | None = None) -> FluidPayoff:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"peer fraction {x!r} outside [0, 1]")
    return _model(costs, cfg).ad(providers, x)


def fluid_chi(
    costs,
    providers: Iterable[str],
    x: float,
    weights: Mapping[str, float] | None = None,
    cfg: QuadratureConfig | None = None,
) -> FluidPayoff:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"peer fraction {x!r} outside [0, 1]")
    return _model(costs, cfg).chi(providers, x, weights)


def efficiency_residual(model: FluidModel, payoff: FluidPayoff) -> float:
    """Payoff total minus coalition worth; zero up to quadrature error."""
    return payoff.total() - model.worth(payoff.providers, payoff.x)


def noncontributing_providers(costs, tol: float = 1e-9) -> set[str]:
    model = _model(costs)
    z = model.providers
    out = set()
    for p in z:
        rest = [n for n in z if n != p]
        gap = model.m(z, 1.0) - model.m(rest, 1.0) - model.costs[p].at_zero
        if abs(gap) <= tol:
            out.add(p)
    return out


def core_violation_margin(costs, p: str, cfg: QuadratureConfig | None = None) -> float:
    """Shapley payoff of ``p`` minus its marginal contribution to the grand worth."""
    model = _model(costs, cfg)
    z = model.providers
    if len(z) < 2:
        raise GameStructureError("the core margin needs at least two providers")
    if p not in z:
        raise GameStructureError(f"unknown provider {p!r}")
    rest = [n for n in z if n != p]
    marginal = model.costs[p].at_zero - (model.m(z, 1.0) - model.m(rest, 1.0))
    return model.shapley().providers[p] - marginal


def fair_identity_residual(
    costs,
    providers: Iterable[str],
    p: str,
    x: float,
    cfg: QuadratureConfig | None = None,
    method: str = "integral",
) -> float:
    """Peer payoff gained by adding ``p`` minus the slope of ``p``'s payoff.

    ``method="integral"`` differentiates under the integral sign;
    ``method="difference"`` takes a central difference of the payoff with
    step ``cfg.payoff_step`` (one-sided at the ends), which loses accuracy
    near ``x = 0`` when a cost has an unbounded second derivative there.
    """
    model = _model(costs, cfg)
    zbar = model.key(providers)
    if p not in zbar:
        raise GameStructureError(f"{p!r} is not in the coalition")
    if method == "integral":
        slope = model.provider_slope(zbar, p, x)
    elif method == "difference":
        h = model.cfg.payoff_step
        phi = lambda t: model.provider_ad(zbar, p, t)
        if x - h >= 0.0 and x + h <= 1.0:
            slope = (phi(x + h) - phi(x - h)) / (2 * h)
        elif x - h < 0.0:
            slope = (-3 * phi(x) + 4 * phi(x + h) - phi(x + 2 * h)) / (2 * h)
        else:
            slope = (3 * phi(x) - 4 * phi(x - h) + phi(x - 2 * h)) / (2 * h)
    else:
        raise ValueError(f"unknown method {method!r}")
    rest = [n for n in zbar if n != p]
    return model.peer_ad(zbar, x) - model.peer_ad(rest, x) - slope


def chi_surplus_threshold(
    costs, provider: str, weights: Mapping[str, float] | None = None, scan: int = 200
) -> float | None:
    """Smallest peer fraction beyond which the coalition of ``provider`` and its
    peers is worth more than its members' Shapley payoffs; ``None`` if never."""
    model = _model(costs)
    phi = model.shapley()

    def surplus(x: float) -> float:
        return model.worth([provider], x) - x * phi.peer - phi.providers[provider]

    xs = np.linspace(0.0, 1.0, scan + 1)
    vals = [surplus(float(t)) for t in xs]
    for k in range(scan):
        if vals[k] <= 0 < vals[k + 1]:
            return _bisect(surplus, float(xs[k]), float(xs[k + 1]))
    return 0.0 if vals[0] > 0 else None


def _bisect(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10) -> float:
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def peer_split_equilibrium(
    costs,
    p: str,
    q: str,
    cfg: QuadratureConfig | None = None,
    *,
    kind: str = "ad",
    weights: Mapping[str, float] | None = None,
    total: float = 1.0,
    start: float | None = None,
    scan: int = 40,
    threshold: float = 1e-9,
) -> SplitResult:
    """Where peers settle when choosing between ``{p}`` and ``{q}``.

    Peers drift toward the provider paying more per peer. With ``x`` peers at
    ``p`` and ``total - x`` at ``q``, ``d(x) = pay_p(x) - pay_q(total - x)``;
    a crossing where ``d`` falls from positive to negative attracts, while
    ``d(total) > 0`` (or ``d(0) < 0``) makes a monopoly attract. The result
    is the attractor whose basin holds ``start``; without a start it is the
    attractor paying each peer the most.
    """
    model = _model(costs, cfg)
    if len(model.providers) != 2 or {p, q} != set(model.providers):
        raise GameStructureError("the split needs exactly the two providers p and q")
    if not 0.0 < total <= 1.0:
        raise ValueError("total peer fraction must lie in (0, 1]")

    def pay(name: str, x: float) -> float:
        if kind == "ad":
            return model.peer_ad([name], x)
        if kind == "chi":
            return model.chi([name], x, weights).peer
        raise ValueError(f"unknown value kind {kind!r}")

    def d(x: float) -> float:
        return pay(p, x) - pay(q, total - x)

    xs = [total * k / scan for k in range(scan + 1)]
    ds = [d(x) for x in xs]
    if all(abs(v) <= threshold for v in ds):
        return SplitResult(total / 2, None, indifferent=True)

    crossings: list[tuple[float, bool]] = []
    # brackets run between consecutive grid points where d is clearly nonzero
    clear = [k for k in range(scan + 1) if abs(ds[k]) > threshold]
    for k, j in zip(clear, clear[1:]):
        a, b = ds[k], ds[j]
        if (a > 0) != (b > 0):
            r = _bisect(d, xs[k], xs[j])
            crossings.append((r, a > 0))  # falling through zero attracts
    # attractors in order along [0, total], each with its basin
    attract: list[float] = []
    if ds[0] < -threshold:
        attract.append(0.0)
    bounds = [0.0]
    for r, stable in crossings:
        if stable:
            attract.append(r)
        else:
            bounds.append(r)
    if ds[-1] > threshold:
        attract.append(total)
    bounds.append(total)
    if not attract:
        # d never changes sign usefully and hugs zero at one end
        attract.append(0.0 if abs(ds[0]) <= abs(ds[-1]) else total)
    basins = list(zip(bounds, bounds[1:]))
    if len(basins) != len(attract):
        # a crossing hides below the threshold; fall back to nearest-attractor basins
        mids = [0.5 * (a + b) for a, b in zip(attract, attract[1:])]
        basins = list(zip([0.0] + mids, mids + [total]))
    if start is not None:
        pick = next(k for k, (a, b) in enumerate(basins) if a <= start <= b)
    else:
        # peers coordinate on the settlement that pays each of them the most
        def peer_pay(x: float) -> float:
            return pay(q, total) if x <= 0.0 else pay(p, x)

        pays = [peer_pay(a) for a in attract]
        top = max(pays)
        tied = [k for k, v in enumerate(pays) if top - v <= threshold]
        pick = tied[0]
        if len(tied) > 1:
            # equally good settlements: peers stay at the indifference point
            between = [r for r, _ in crossings if attract[tied[0]] < r < attract[tied[1]]]
            if between:
                return SplitResult(between[0], None, [r for r, _ in crossings],
                                   [r for r, st in crossings if st])
    x = attract[pick]
    monopoly = None
    if x >= total:
        monopoly = p
    elif x <= 0.0:
        monopoly = q
    return SplitResult(
        x,
        monopoly,
        [r for r, _ in crossings],
        [r for r, s in crossings if s],
    )
