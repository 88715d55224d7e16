"""Finite TU games with coalition structure, in exact rational arithmetic.

Coalitions are ``int`` bitmasks over the player indices of a
:class:`WorthFunction`; bit ``i`` set means player ``i`` is a member.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Iterator, Mapping, Sequence, Union

__all__ = [
    "DEFAULT_MAX_PLAYERS",
    "CapacityError",
    "GameStructureError",
    "Role",
    "Player",
    "WorthFunction",
    "Partition",
    "PayoffVector",
    "ValueKind",
    "AxiomReport",
    "shapley",
    "ad_value",
    "chi_value",
    "value",
    "core_violations",
    "in_core",
    "blocking_coalitions",
    "check_axioms",
    "check_additivity",
    "check_weighted_splitting",
    "null_players",
    "symmetric_pairs",
]

DEFAULT_MAX_PLAYERS = 20

Rational = Union[Fraction, int]


class CapacityError(ValueError):
    """The requested computation exceeds a configured size limit."""


class GameStructureError(ValueError):
    """Malformed players, coalitions, partitions or payoff vectors."""


class Role(str, enum.Enum):
    PROVIDER = "provider"
    PEER = "peer"


@dataclass(frozen=True)
class Player:
    name: str
    role: Role = Role.PEER


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def members(mask: int) -> Iterator[int]:
    i = 0
    while mask:
        if mask & 1:
            yield i
        mask >>= 1
        i += 1


def submasks(mask: int) -> Iterator[int]:
    """All submasks of ``mask``, including 0 and ``mask`` itself."""
    sub = mask
    while True:
        yield sub
        if sub == 0:
            return
        sub = (sub - 1) & mask


class WorthFunction:
    """Dense table ``v[mask]`` of exact worths, with ``v(empty) == 0``."""

    __slots__ = ("players", "values", "_index")

    def __init__(self, players: Sequence[Player], values: Sequence[Rational]):
        players = tuple(players)
        if len(values) != 1 << len(players):
            raise GameStructureError(
                f"expected {1 << len(players)} worth entries, got {len(values)}"
            )
        names = [p.name for p in players]
        if len(set(names)) != len(names):
            raise GameStructureError(f"duplicate player names in {names}")
        vals = tuple(Fraction(v) for v in values)
        if vals[0] != 0:
            raise GameStructureError(f"worth of the empty coalition must be 0, got {vals[0]}")
        self.players = players
        self.values = vals
        self._index = {name: i for i, name in enumerate(names)}

    @classmethod
    def from_function(
        cls,
        players: Sequence[Player],
        fn: Callable[[int], Rational],
        max_players: int = DEFAULT_MAX_PLAYERS,
    ) -> "WorthFunction":
        check_capacity(len(players), max_players)
        return cls(players, [0] + [fn(m) for m in range(1, 1 << len(players))])

    @classmethod
    def from_entries(
        cls, players: Sequence[Player], entries: Mapping[str, Rational]
    ) -> "WorthFunction":
        """Build from ``{"p1 n1": 5, ...}``; unlisted coalitions are worth 0."""
        values = [Fraction(0)] * (1 << len(players))
        probe = cls(players, values)
        for key, worth in entries.items():
            values[probe.mask_of(key.split())] = Fraction(worth)
        return cls(players, values)

    @property
    def n(self) -> int:
        return len(self.players)

    @property
    def grand(self) -> int:
        return (1 << len(self.players)) - 1

    def __call__(self, mask: int) -> Fraction:
        return self.values[mask]

    def __add__(self, other: "WorthFunction") -> "WorthFunction":
        if self.players != other.players:
            raise GameStructureError("games over different player sets")
        return WorthFunction(self.players, [a + b for a, b in zip(self.values, other.values)])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, WorthFunction)
            and self.players == other.players
            and self.values == other.values
        )

    def __hash__(self) -> int:
        return hash((self.players, self.values))

    def __repr__(self) -> str:
        return f"WorthFunction(players={[p.name for p in self.players]}, n={self.n})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise GameStructureError(f"unknown player {name!r}") from None

    def mask_of(self, names: Iterable[str]) -> int:
        mask = 0
        for name in names:
            mask |= 1 << self.index(name)
        return mask

    def names_of(self, mask: int) -> list[str]:
        return [self.players[i].name for i in members(mask)]

    def format_set(self, mask: int) -> str:
        return " ".join(self.names_of(mask)) or "-"

    def role_mask(self, role: Role) -> int:
        return sum(1 << i for i, p in enumerate(self.players) if p.role == role)

    def partition(self, text_or_blocks: str | Sequence[Iterable[str]]) -> "Partition":
        """Parse ``"{a b | c}"`` (or a list of name lists) into a partition."""
        if isinstance(text_or_blocks, str):
            blocks = parse_partition_text(text_or_blocks)
        else:
            blocks = [list(b) for b in text_or_blocks]
        return Partition.of(self.n, [self.mask_of(b) for b in blocks])

    def format_partition(self, partition: "Partition") -> str:
        return "{" + " | ".join(self.format_set(b) for b in partition.blocks) + "}"


def parse_partition_text(text: str) -> list[list[str]]:
    m = re.fullmatch(r"\s*\{(.*)\}\s*", text)
    body = m.group(1) if m else text
    blocks = [part.split() for part in body.split("|")]
    if any(not b for b in blocks):
        raise GameStructureError(f"empty block in partition {text!r}")
    return blocks


def check_capacity(n: int, limit: int) -> None:
    if n > limit:
        raise CapacityError(
            f"{n} players exceeds the limit of {limit}; raise max_players to override"
        )


@dataclass(frozen=True)
class Partition:
    """Coalition structure over players ``0..n-1``; blocks ordered by least member."""

    n: int
    blocks: tuple[int, ...]

    @classmethod
    def of(cls, n: int, blocks: Iterable[int]) -> "Partition":
        blocks = list(blocks)
        seen = 0
        for b in blocks:
            if b == 0:
                raise GameStructureError("partition has an empty block")
            if b & seen:
                raise GameStructureError("partition blocks overlap")
            if b >> n:
                raise GameStructureError("partition block outside the player set")
            seen |= b
        if seen != (1 << n) - 1:
            raise GameStructureError("partition does not cover every player")
        return cls(n, tuple(sorted(blocks, key=lambda b: b & -b)))

    @classmethod
    def grand(cls, n: int) -> "Partition":
        return cls(n, ((1 << n) - 1,))

    @classmethod
    def singletons(cls, n: int) -> "Partition":
        return cls(n, tuple(1 << i for i in range(n)))

    def block_of(self, i: int) -> int:
        for b in self.blocks:
            if b >> i & 1:
                return b
        raise GameStructureError(f"player {i} not covered")

    def refines(self, coarser: "Partition") -> bool:
        """True if every block of ``self`` lies inside a block of ``coarser``."""
        return all(any(b & c == b for c in coarser.blocks) for b in self.blocks)

    def __contains__(self, block: int) -> bool:
        return block in self.blocks


class PayoffVector:
    """Exact payoff per player, indexable by player index or name."""

    __slots__ = ("players", "values")

    def __init__(self, players: Sequence[Player], values: Sequence[Rational]):
        if len(players) != len(values):
            raise GameStructureError("payoff vector must cover every player")
        self.players = tuple(players)
        self.values = tuple(Fraction(v) for v in values)

    def __getitem__(self, key: int | str) -> Fraction:
        if isinstance(key, str):
            for p, v in zip(self.players, self.values):
                if p.name == key:
                    return v
            raise KeyError(key)
        return self.values[key]

    def __iter__(self) -> Iterator[Fraction]:
        return iter(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, PayoffVector):
            return self.players == other.players and self.values == other.values
        return NotImplemented

    def __add__(self, other: "PayoffVector") -> "PayoffVector":
        return PayoffVector(self.players, [a + b for a, b in zip(self.values, other.values)])

    def __repr__(self) -> str:
        inner = ", ".join(f"{p.name}: {v}" for p, v in zip(self.players, self.values))
        return f"PayoffVector({inner})"

    def total(self, mask: int) -> Fraction:
        return sum((self.values[i] for i in members(mask)), Fraction(0))

    def as_dict(self) -> dict[str, Fraction]:
        return {p.name: v for p, v in zip(self.players, self.values)}


class ValueKind(str, enum.Enum):
    SHAPLEY = "shapley"
    AD = "ad"
    CHI = "chi"


# ---------------------------------------------------------------------------
# Values


def _order_weights(size: int) -> list[Fraction]:
    """``w[s] = s! (size-s-1)! / size!`` by incremental multiplication."""
    w = [Fraction(1, size)]
    for s in range(size - 1):
        w.append(w[-1] * (s + 1) / (size - s - 1))
    return w


def _shapley_on(v: WorthFunction, coalition: int) -> dict[int, Fraction]:
    """Shapley value of the game restricted to ``coalition``."""
    players = list(members(coalition))
    weights = _order_weights(len(players))
    out = {}
    for i in players:
        bit = 1 << i
        rest = coalition & ~bit
        acc = Fraction(0)
        for s in submasks(rest):
            acc += weights[popcount(s)] * (v.values[s | bit] - v.values[s])
        out[i] = acc
    return out


def shapley(v: WorthFunction, max_players: int = DEFAULT_MAX_PLAYERS) -> PayoffVector:
    check_capacity(v.n, max_players)
    if v.n == 0:
        return PayoffVector((), ())
    phi = _shapley_on(v, v.grand)
    return PayoffVector(v.players, [phi[i] for i in range(v.n)])


def _check_partition(v: WorthFunction, partition: Partition) -> None:
    if partition.n != v.n:
        raise GameStructureError(
            f"partition is over {partition.n} players, game has {v.n}"
        )


def ad_value(
    v: WorthFunction, partition: Partition, max_players: int = DEFAULT_MAX_PLAYERS
) -> PayoffVector:
    """Aumann-Dreze value: the Shapley value of each block's reduced game."""
    check_capacity(v.n, max_players)
    _check_partition(v, partition)
    out = [Fraction(0)] * v.n
    for block in partition.blocks:
        for i, x in _shapley_on(v, block).items():
            out[i] = x
    return PayoffVector(v.players, out)


def _weights(v: WorthFunction, weights: Mapping[str, Rational] | Sequence[Rational] | None) -> list[Fraction]:
    if weights is None:
        return [Fraction(1)] * v.n
    if isinstance(weights, Mapping):
        w = [Fraction(weights.get(p.name, 1)) for p in v.players]
        unknown = set(weights) - {p.name for p in v.players}
        if unknown:
            raise GameStructureError(f"weights for unknown players {sorted(unknown)}")
    else:
        w = [Fraction(x) for x in weights]
        if len(w) != v.n:
            raise GameStructureError("weight vector must cover every player")
    if any(x <= 0 for x in w):
        raise GameStructureError("weights must be strictly positive")
    return w


def _chi_block(
    v: WorthFunction, phi: PayoffVector, w: Sequence[Fraction], block: int
) -> dict[int, Fraction]:
    ids = list(members(block))
    surplus = v.values[block] - sum((phi.values[i] for i in ids), Fraction(0))
    total_w = sum((w[i] for i in ids), Fraction(0))
    return {i: phi.values[i] + w[i] / total_w * surplus for i in ids}


def chi_value(
    v: WorthFunction,
    partition: Partition,
    weights: Mapping[str, Rational] | Sequence[Rational] | None = None,
    max_players: int = DEFAULT_MAX_PLAYERS,
    phi: PayoffVector | None = None,
) -> PayoffVector:
    """Shapley value plus a weight-proportional share of each block's
    surplus ``v(C) - phi(C)``. ``phi`` may be passed in to skip recomputing
    the Shapley value of the whole game."""
    check_capacity(v.n, max_players)
    _check_partition(v, partition)
    w = _weights(v, weights)
    phi = phi if phi is not None else shapley(v, max_players)
    out = [Fraction(0)] * v.n
    for block in partition.blocks:
        for i, x in _chi_block(v, phi, w, block).items():
            out[i] = x
    return PayoffVector(v.players, out)


def value(
    v: WorthFunction,
    partition: Partition,
    kind: ValueKind | str,
    weights: Mapping[str, Rational] | Sequence[Rational] | None = None,
    max_players: int = DEFAULT_MAX_PLAYERS,
) -> PayoffVector:
    kind = ValueKind(kind)
    if kind is ValueKind.SHAPLEY:
        return shapley(v, max_players)
    if kind is ValueKind.AD:
        return ad_value(v, partition, max_players)
    return chi_value(v, partition, weights, max_players)


# ---------------------------------------------------------------------------
# Core and stability


def core_violations(v: WorthFunction, phi: PayoffVector) -> list[int]:
    """Every coalition ``K`` with ``phi(K) < v(K)``, in increasing mask order."""
    if len(phi) != v.n:
        raise GameStructureError("payoff vector must cover every player")
    # subset sums by lowest-bit recurrence
    sums = [Fraction(0)] * (1 << v.n)
    out = []
    for mask in range(1, 1 << v.n):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + phi.values[low.bit_length() - 1]
        if sums[mask] < v.values[mask]:
            out.append(mask)
    return out


def in_core(v: WorthFunction, phi: PayoffVector) -> bool:
    return phi.total(v.grand) == v(v.grand) and not core_violations(v, phi)


def blocking_coalitions(
    v: WorthFunction,
    partition: Partition,
    kind: ValueKind | str = ValueKind.AD,
    weights: Mapping[str, Rational] | Sequence[Rational] | None = None,
    max_players: int = DEFAULT_MAX_PLAYERS,
) -> list[int]:
    """Coalitions whose members all strictly gain by forming their own block.

    Both values are coalition independent, so a candidate's payoffs depend
    only on the candidate itself and not on how the others regroup.
    """
    return _Stability(v, kind, weights, max_players).blocking(partition)


class _Stability:
    """Caches per-coalition payoffs so that many partitions can be scanned."""

    def __init__(self, v, kind, weights, max_players):
        check_capacity(v.n, max_players)
        self.v = v
        self.kind = ValueKind(kind)
        if self.kind is ValueKind.SHAPLEY:
            raise GameStructureError("stability needs a partition value (ad or chi)")
        self.w = _weights(v, weights)
        self.phi = shapley(v, max_players) if self.kind is ValueKind.CHI else None
        self._cache: dict[int, dict[int, Fraction]] = {}

    def block_payoffs(self, block: int) -> dict[int, Fraction]:
        got = self._cache.get(block)
        if got is None:
            if self.kind is ValueKind.AD:
                got = _shapley_on(self.v, block)
            else:
                got = _chi_block(self.v, self.phi, self.w, block)
            self._cache[block] = got
        return got

    def payoffs(self, partition: Partition) -> list[Fraction]:
        _check_partition(self.v, partition)
        out = [Fraction(0)] * self.v.n
        for block in partition.blocks:
            for i, x in self.block_payoffs(block).items():
                out[i] = x
        return out

    def blocking(self, partition: Partition) -> list[int]:
        current = self.payoffs(partition)
        out = []
        for c in range(1, 1 << self.v.n):
            new = self.block_payoffs(c)
            if all(new[i] > current[i] for i in new):
                out.append(c)
        return out


# ---------------------------------------------------------------------------
# Axioms


@dataclass(frozen=True)
class AxiomReport:
    ce: bool
    cs: bool
    np: bool
    gnp: bool

    def failures(self) -> list[str]:
        return [name.upper() for name in ("ce", "cs", "np", "gnp") if not getattr(self, name)]


def null_players(v: WorthFunction, within: int | None = None) -> list[int]:
    """Players ``i`` with ``v(K + i) == v(K)`` for every ``K`` inside ``within``
    (the whole player set by default)."""
    within = v.grand if within is None else within
    out = []
    for i in members(within):
        bit = 1 << i
        rest = within & ~bit
        if all(v.values[k | bit] == v.values[k] for k in submasks(rest)):
            out.append(i)
    return out


def symmetric_pairs(v: WorthFunction) -> list[tuple[int, int]]:
    """Pairs ``(i, j)`` with ``v(K + i) == v(K + j)`` for all ``K`` avoiding both."""
    out = []
    for i in range(v.n):
        for j in range(i + 1, v.n):
            bi, bj = 1 << i, 1 << j
            rest = v.grand & ~(bi | bj)
            if all(v.values[k | bi] == v.values[k | bj] for k in submasks(rest)):
                out.append((i, j))
    return out


def check_axioms(v: WorthFunction, partition: Partition, phi: PayoffVector) -> AxiomReport:
    """Evaluate CE, CS, NP and GNP on one payoff vector.

    NP is read on the reduced game of each block: a player who adds nothing
    to any coalition inside its own block must get zero. GNP only constrains
    the grand coalition and holds vacuously for any other partition.
    """
    _check_partition(v, partition)
    ce = all(phi.total(b) == v(b) for b in partition.blocks)
    cs = all(
        phi[i] == phi[j]
        for i, j in symmetric_pairs(v)
        if partition.block_of(i) == partition.block_of(j)
    )
    np_ok = all(phi[i] == 0 for b in partition.blocks for i in null_players(v, b))
    if partition.blocks == (v.grand,):
        gnp = all(phi[i] == 0 for i in null_players(v))
    else:
        gnp = True
    return AxiomReport(ce=ce, cs=cs, np=np_ok, gnp=gnp)


def check_additivity(
    value_fn: Callable[[WorthFunction], PayoffVector],
    v1: WorthFunction,
    v2: WorthFunction,
) -> bool:
    """``value(v1 + v2) == value(v1) + value(v2)`` for a fixed partition/weights."""
    return value_fn(v1 + v2) == value_fn(v1) + value_fn(v2)


def check_weighted_splitting(
    coarse: Partition,
    fine: Partition,
    phi_coarse: PayoffVector,
    phi_fine: PayoffVector,
    weights: Sequence[Rational],
) -> bool:
    """Within every block of the finer partition, the payoff change divided by
    the player's weight must be the same for all members."""
    if not fine.refines(coarse):
        raise GameStructureError("second partition does not refine the first")
    w = [Fraction(x) for x in weights]
    for block in fine.blocks:
        ratios = {(phi_coarse[i] - phi_fine[i]) / w[i] for i in members(block)}
        if len(ratios) > 1:
            return False
    return True
