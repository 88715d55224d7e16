"""Coalition-structure dynamics driven by blocking coalitions.

At each step one coalition whose members all strictly gain by breaking away
forms its own block. The transition graph over all partitions shows which
structures are absorbing and which keep cycling.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import networkx as nx

from .game import (
    CapacityError,
    GameStructureError,
    Partition,
    ValueKind,
    WorthFunction,
    _Stability,
)

__all__ = [
    "MAX_ENUMERATED_PLAYERS",
    "Residual",
    "TransitionGraph",
    "RecurrenceReport",
    "enumerate_partitions",
    "successor",
    "build_graph",
    "recurrence",
    "trajectory",
    "bell_number",
]

MAX_ENUMERATED_PLAYERS = 12


class Residual(str, enum.Enum):
    """What happens to the rest of a block that loses members.

    ``KEEP`` leaves the remaining members together; ``SCATTER`` splits them
    into singletons.
    """

    KEEP = "keep"
    SCATTER = "scatter"


def bell_number(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def _restricted_growth(n: int) -> Iterator[list[int]]:
    # block labels a[i] <= 1 + max(a[:i]); lexicographic order
    a = [0] * n

    def rec(i: int, top: int):
        if i == n:
            yield list(a)
            return
        for label in range(top + 2):
            a[i] = label
            yield from rec(i + 1, max(top, label))

    if n == 0:
        yield []
        return
    yield from rec(1, 0)


def enumerate_partitions(n: int, max_players: int = MAX_ENUMERATED_PLAYERS) -> list[Partition]:
    """All partitions of ``n`` players, in restricted-growth order."""
    if n < 1:
        raise GameStructureError("need at least one player")
    if n > max_players:
        raise CapacityError(
            f"{n} players would give {bell_number(n)} partitions; the limit is {max_players} players"
        )
    out = []
    for labels in _restricted_growth(n):
        blocks = [0] * (max(labels) + 1)
        for i, label in enumerate(labels):
            blocks[label] |= 1 << i
        out.append(Partition(n, tuple(blocks)))
    return out


def successor(partition: Partition, c: int, residual: Residual | str = Residual.KEEP) -> Partition:
    """Partition after ``c`` breaks away and forms its own block."""
    if c == 0:
        raise GameStructureError("a blocking coalition cannot be empty")
    if c >> partition.n:
        raise GameStructureError("coalition outside the player set")
    residual = Residual(residual)
    blocks = [c]
    for b in partition.blocks:
        rest = b & ~c
        if not rest:
            continue
        if rest == b or residual is Residual.KEEP:
            blocks.append(rest)
        else:
            i = 0
            while rest >> i:
                if rest >> i & 1:
                    blocks.append(1 << i)
                i += 1
    return Partition.of(partition.n, blocks)


@dataclass(frozen=True)
class TransitionGraph:
    """Every partition, and one edge per blocking coalition leaving it."""

    v: WorthFunction
    kind: ValueKind
    nodes: tuple[Partition, ...]
    edges: tuple[tuple[Partition, int, Partition], ...]
    residual: Residual = Residual.KEEP

    def out_edges(self, partition: Partition) -> list[tuple[int, Partition]]:
        return [(c, dst) for src, c, dst in self.edges if src == partition]

    def stable(self) -> list[Partition]:
        sources = {src for src, _, _ in self.edges}
        return [p for p in self.nodes if p not in sources]

    def digraph(self) -> nx.MultiDiGraph:
        g = nx.MultiDiGraph()
        g.add_nodes_from(self.nodes)
        for src, c, dst in self.edges:
            g.add_edge(src, dst, coalition=c)
        return g

    def to_edge_list(self) -> str:
        """One ``source<TAB>coalition<TAB>target`` line per edge."""
        fmt = self.v.format_partition
        lines = [
            f"{fmt(src)}\t{{{self.v.format_set(c)}}}\t{fmt(dst)}" for src, c, dst in self.edges
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def to_dot(self, name: str = "dynamics") -> str:
        fmt = self.v.format_partition
        index = {p: k for k, p in enumerate(self.nodes)}
        stable = set(self.stable())
        out = [f"digraph {name} {{"]
        for p, k in index.items():
            shape = "doublecircle" if p in stable else "ellipse"
            out.append(f'  s{k} [label="{fmt(p)}", shape={shape}];')
        for src, c, dst in self.edges:
            out.append(f'  s{index[src]} -> s{index[dst]} [label="{self.v.format_set(c)}"];')
        out.append("}")
        return "\n".join(out) + "\n"


def build_graph(
    v: WorthFunction,
    kind: ValueKind | str = ValueKind.AD,
    weights: Mapping[str, object] | Sequence[object] | None = None,
    residual: Residual | str = Residual.KEEP,
    max_players: int = MAX_ENUMERATED_PLAYERS,
) -> TransitionGraph:
    nodes = enumerate_partitions(v.n, max_players)
    stab = _Stability(v, kind, weights, max_players)
    edges = []
    for p in nodes:
        for c in stab.blocking(p):
            edges.append((p, c, successor(p, c, residual)))
    return TransitionGraph(v, stab.kind, tuple(nodes), tuple(edges), Residual(residual))


@dataclass(frozen=True)
class RecurrenceReport:
    stable: tuple[Partition, ...]
    recurrent: tuple[frozenset[Partition], ...]
    transient: frozenset[Partition]

    @property
    def oscillates(self) -> bool:
        return any(len(cls) > 1 for cls in self.recurrent)


def recurrence(graph: TransitionGraph) -> RecurrenceReport:
    """Closed communicating classes of the transition graph.

    A class with one member and no way out is a stable partition; a larger
    class is an oscillation that never settles.
    """
    g = nx.DiGraph()
    g.add_nodes_from(graph.nodes)
    g.add_edges_from((src, dst) for src, _, dst in graph.edges)
    order = {p: k for k, p in enumerate(graph.nodes)}
    classes = [frozenset(c) for c in nx.attracting_components(g)]
    classes.sort(key=lambda cls: min(order[p] for p in cls))
    stable = tuple(
        next(iter(cls)) for cls in classes if len(cls) == 1 and not g.has_edge(*(2 * [next(iter(cls))]))
    )
    recurrent_nodes = set().union(*classes) if classes else set()
    transient = frozenset(p for p in graph.nodes if p not in recurrent_nodes)
    return RecurrenceReport(stable, tuple(classes), transient)


def trajectory(
    v: WorthFunction,
    kind: ValueKind | str,
    start: Partition,
    weights: Mapping[str, object] | Sequence[object] | None = None,
    policy: str = "first",
    max_steps: int = 100,
    seed: int | None = None,
    residual: Residual | str = Residual.KEEP,
) -> list[tuple[Partition, int]]:
    """Steps taken from ``start``: each entry is the partition reached and
    the coalition that formed to reach it. Empty when ``start`` is stable.

    ``policy`` is ``"first"`` (lowest coalition mask) or ``"random"``
    (uniform among blocking coalitions, reproducible through ``seed``).
    """
    if policy not in ("first", "random"):
        raise ValueError(f"unknown policy {policy!r}")
    stab = _Stability(v, kind, weights, max(v.n, MAX_ENUMERATED_PLAYERS))
    rng = random.Random(seed)
    here = Partition.of(v.n, start.blocks)
    steps: list[tuple[Partition, int]] = []
    for _ in range(max_steps):
        options = stab.blocking(here)
        if not options:
            break
        c = options[0] if policy == "first" else rng.choice(options)
        here = successor(here, c, residual)
        steps.append((here, c))
    return steps
