"""Worth of coalitions in a peer-assisted service with several providers.

A coalition holding one provider is worth that provider's cost saving from
its peers. A coalition holding several providers is worth the best split of
its peers among them, each peer helping exactly one provider; that is the
only worth function that is both superadditive and at least as large as any
other admissible one.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

from .expr import CostCurve
from .game import (
    DEFAULT_MAX_PLAYERS,
    GameStructureError,
    Player,
    Role,
    WorthFunction,
    check_capacity,
    members,
    popcount,
    submasks,
)

__all__ = [
    "PeerGameSpec",
    "hat_worth",
    "coalescent_worth",
    "best_allocation",
    "allocation_table",
    "build_worth_function",
    "is_superadditive",
    "to_rational",
]

SIGNIFICANT_DIGITS = 12


def to_rational(value: float, digits: int = SIGNIFICANT_DIGITS) -> Fraction:
    return Fraction(f"{value:.{digits}g}")


@dataclass(frozen=True)
class PeerGameSpec:
    """Providers plus ``eta`` peers, described either by cost curves or by a
    table of single-provider worths.

    With ``costs``, curve ``k`` gives provider ``k``'s operational cost as a
    function of the assisting fraction ``x`` and peers are interchangeable.
    With ``hat_table``, worths are listed per ``(provider index, peer mask)``
    and unlisted entries are 0; peers may then differ.
    """

    providers: tuple[str, ...]
    peers: tuple[str, ...]
    costs: tuple[CostCurve, ...] | None = None
    hat_table: Mapping[tuple[int, int], Fraction] | None = None
    digits: int = SIGNIFICANT_DIGITS
    _cost_cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.providers:
            raise GameStructureError("at least one provider is required")
        if not self.peers:
            raise GameStructureError("at least one peer is required (eta >= 1)")
        if (self.costs is None) == (self.hat_table is None):
            raise GameStructureError("give exactly one of cost curves or a worth table")
        if self.costs is not None and len(self.costs) != len(self.providers):
            raise GameStructureError("one cost curve per provider")

    @classmethod
    def from_costs(
        cls,
        costs: Mapping[str, CostCurve],
        eta: int,
        peer_names: Sequence[str] | None = None,
        digits: int = SIGNIFICANT_DIGITS,
    ) -> "PeerGameSpec":
        if eta < 1:
            raise GameStructureError("eta must be a positive integer")
        peers = tuple(peer_names) if peer_names else tuple(f"n{k + 1}" for k in range(eta))
        if len(peers) != eta:
            raise GameStructureError("one name per peer")
        spec = cls(tuple(costs), peers, costs=tuple(costs.values()), digits=digits)
        spec._warn_if_increasing()
        return spec

    @classmethod
    def from_hat_table(
        cls,
        providers: Sequence[str],
        peers: Sequence[str],
        entries: Mapping[str, Fraction | int | str],
    ) -> "PeerGameSpec":
        """``entries`` maps ``"p1 n1 n2"``-style keys (one provider each) to worths."""
        providers, peers = tuple(providers), tuple(peers)
        table: dict[tuple[int, int], Fraction] = {}
        for key, worth in entries.items():
            names = key.split()
            provs = [providers.index(n) for n in names if n in providers]
            unknown = [n for n in names if n not in providers and n not in peers]
            if unknown:
                raise GameStructureError(f"unknown player {unknown[0]!r} in {key!r}")
            if len(provs) != 1:
                raise GameStructureError(
                    f"worth entry {key!r} must name exactly one provider"
                )
            mask = sum(1 << peers.index(n) for n in names if n in peers)
            table[(provs[0], mask)] = Fraction(worth)
        for (p, mask), worth in table.items():
            if mask == 0 and worth != 0:
                raise GameStructureError("a provider alone must be worth 0")
        return cls(providers, peers, hat_table=table)

    @property
    def eta(self) -> int:
        return len(self.peers)

    @property
    def anonymous(self) -> bool:
        return self.costs is not None

    @property
    def players(self) -> tuple[Player, ...]:
        return tuple(Player(n, Role.PROVIDER) for n in self.providers) + tuple(
            Player(n, Role.PEER) for n in self.peers
        )

    def cost(self, provider: int, k: int) -> Fraction:
        """Provider cost with ``k`` assisting peers, as a rational."""
        key = (provider, k)
        got = self._cost_cache.get(key)
        if got is None:
            curve = self.costs[provider]
            x = Fraction(k, self.eta)
            got = curve.exact(x)
            if got is None:
                got = to_rational(curve(float(x)), self.digits)
            self._cost_cache[key] = got
        return got

    def hat(self, provider: int, peer_mask: int) -> Fraction:
        """Worth of ``{provider} + peers(peer_mask)``."""
        if self.anonymous:
            return self.cost(provider, 0) - self.cost(provider, popcount(peer_mask))
        return self.hat_table.get((provider, peer_mask), Fraction(0))

    def split(self, mask: int) -> tuple[list[int], int]:
        """Provider indices and peer mask of a player-set mask."""
        z = len(self.providers)
        provs = [i for i in members(mask & ((1 << z) - 1))]
        return provs, mask >> z

    def _warn_if_increasing(self) -> None:
        for p, name in enumerate(self.providers):
            vals = [self.cost(p, k) for k in range(self.eta + 1)]
            if any(b > a for a, b in zip(vals, vals[1:])):
                warnings.warn(
                    f"cost of provider {name!r} increases with assisting peers",
                    stacklevel=3,
                )


def hat_worth(spec: PeerGameSpec, mask: int) -> Fraction:
    provs, peers = spec.split(mask)
    if len(provs) > 1:
        raise GameStructureError(
            "single-provider worth is undefined for several providers; use coalescent_worth"
        )
    if not provs:
        return Fraction(0)
    return spec.hat(provs[0], peers)


def best_allocation(spec: PeerGameSpec, mask: int) -> tuple[Fraction, tuple[int, ...]]:
    """Optimal split of the coalition's peers among its providers.

    Returns the worth and, per provider in the coalition (ascending index),
    the peer mask it receives. Among optimal splits the one whose vector of
    peer counts is lexicographically smallest is returned.
    """
    provs, peers = spec.split(mask)
    if not provs:
        return Fraction(0), ()
    if spec.anonymous:
        worth, counts = _best_counts(spec, tuple(provs), popcount(peers))
        # hand out concrete peers in index order
        out, pool = [], list(members(peers))
        for c in counts:
            out.append(sum(1 << j for j in pool[:c]))
            pool = pool[c:]
        return worth, tuple(out)
    return _best_masks(spec, tuple(provs), peers)


def coalescent_worth(spec: PeerGameSpec, mask: int) -> Fraction:
    return best_allocation(spec, mask)[0]


def _best_counts(spec: PeerGameSpec, provs: tuple[int, ...], k: int):
    # suffix DP: best(j, r) = max_c hat(provs[j], c) + best(j+1, r-c);
    # the smallest optimal c at each stage gives the lexicographically smallest vector
    @lru_cache(maxsize=None)
    def best(j: int, r: int) -> tuple[Fraction, tuple[int, ...]]:
        if j == len(provs) - 1:
            return spec.cost(provs[j], 0) - spec.cost(provs[j], r), (r,)
        top = None
        for c in range(r + 1):
            tail, counts = best(j + 1, r - c)
            here = spec.cost(provs[j], 0) - spec.cost(provs[j], c) + tail
            if top is None or here > top[0]:
                top = (here, (c,) + counts)
        return top

    return best(0, k)


def _best_masks(spec: PeerGameSpec, provs: tuple[int, ...], peers: int):
    @lru_cache(maxsize=None)
    def best(j: int, rest: int) -> tuple[Fraction, tuple[int, ...]]:
        if j == len(provs) - 1:
            return spec.hat(provs[j], rest), (rest,)
        top = None
        # ascending popcount, then mask, so ties keep the smallest count vector
        for sub in sorted(submasks(rest), key=lambda s: (popcount(s), s)):
            tail, assigned = best(j + 1, rest & ~sub)
            here = spec.hat(provs[j], sub) + tail
            if top is None or here > top[0]:
                top = (here, (sub,) + assigned)
        return top

    return best(0, peers)


def allocation_table(spec: PeerGameSpec) -> dict[tuple[int, int], tuple[tuple[int, ...], Fraction]]:
    """For anonymous peers: ``(provider mask, k) -> (peer counts, worth)``."""
    if not spec.anonymous:
        raise GameStructureError("allocation by counts needs interchangeable peers")
    out = {}
    z = len(spec.providers)
    for pmask in range(1, 1 << z):
        provs = tuple(members(pmask))
        for k in range(spec.eta + 1):
            worth, counts = _best_counts(spec, provs, k)
            out[(pmask, k)] = (counts, worth)
    return out


def build_worth_function(
    spec: PeerGameSpec, max_players: int = DEFAULT_MAX_PLAYERS
) -> WorthFunction:
    players = spec.players
    check_capacity(len(players), max_players)
    if spec.anonymous:
        z = len(spec.providers)
        table = allocation_table(spec)
        def fn(mask: int) -> Fraction:
            pmask = mask & ((1 << z) - 1)
            if not pmask:
                return Fraction(0)
            return table[(pmask, popcount(mask >> z))][1]
    else:
        def fn(mask: int) -> Fraction:
            return coalescent_worth(spec, mask)
    return WorthFunction.from_function(players, fn, max_players)


def is_superadditive(v: WorthFunction) -> tuple[bool, tuple[int, int] | None]:
    """Check ``v(S | T) >= v(S) + v(T)`` over all disjoint pairs.

    Returns ``(True, None)`` or ``(False, (S, T))`` for the first violation.
    """
    vals = v.values
    full = v.grand
    for s in range(1, full + 1):
        rest = full & ~s
        for t in submasks(rest):
            # each unordered pair once
            if t == 0 or t < s:
                continue
            if vals[s | t] < vals[s] + vals[t]:
                return False, (s, t)
    return True, None
