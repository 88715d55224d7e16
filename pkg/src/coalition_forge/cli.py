"""Command-line front end.

Exit codes: 0 success, 1 a requested check failed, 2 bad input, 3 too many
players, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from typing import Sequence

from . import dtn as dtn_mod
from .dynamics import build_graph, recurrence
from .expr import ExprDomainError, ExprSyntaxError
from .fluid import QuadratureConfig
from .game import (
    CapacityError,
    GameStructureError,
    Partition,
    ValueKind,
    check_axioms,
    value,
)
from .gamefile import GameFile, GameFileError, load
from .numerics import QuadratureError

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_CAPACITY, EXIT_NUMERIC = 0, 1, 2, 3, 4
THREADS_ENV = "COALITION_FORGE_THREADS"


class UsageError(ValueError):
    pass


def format_fraction(x: Fraction) -> str:
    x = Fraction(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator} (≈ {float(x):.6g})"


def parse_weights(text: str | None) -> dict[str, Fraction]:
    if not text:
        return {}
    out = {}
    for item in text.split(","):
        name, sep, raw = item.partition("=")
        if not sep or not name.strip():
            raise UsageError(f"bad weight {item!r}; expected name=value")
        try:
            out[name.strip()] = Fraction(raw.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise UsageError(f"bad weight value in {item!r}") from exc
    return out


def _threads() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _partition(game: GameFile, text: str | None):
    v = game.worth_function()
    if text is None:
        return v, Partition.grand(v.n)
    return v, v.partition(text)


def _weights(game: GameFile, args) -> dict[str, Fraction]:
    w = game.weight_map()
    w.update(parse_weights(args.weights))
    return w


# -- subcommands ---------------------------------------------------------------


def cmd_payoff(args) -> int:
    game = load(args.file)
    v, part = _partition(game, args.partition)
    kind = ValueKind(args.value)
    if kind is ValueKind.SHAPLEY:
        part = Partition.grand(v.n)
    phi = value(v, part, kind, _weights(game, args) or None)
    if args.format == "csv":
        rows = ["player,payoff"] + [f"{p.name},{phi[i]}" for i, p in enumerate(v.players)]
    else:
        width = max(len(p.name) for p in v.players)
        rows = [f"partition: {v.format_partition(part)}"]
        rows += [f"{p.name:<{width}}  {format_fraction(phi[i])}" for i, p in enumerate(v.players)]
    _emit("\n".join(rows) + "\n", args.out)
    return EXIT_OK


def cmd_dynamics(args) -> int:
    game = load(args.file)
    v = game.worth_function()
    graph = build_graph(v, args.value, _weights(game, args) or None, residual=args.residual)
    if args.format == "edges":
        _emit(graph.to_edge_list(), args.out)
        return EXIT_OK
    if args.format == "dot":
        _emit(graph.to_dot(), args.out)
        return EXIT_OK
    rep = recurrence(graph)
    fmt = v.format_partition
    lines = []
    lines.append("stable: " + (", ".join(fmt(p) for p in rep.stable) if rep.stable else "none"))
    for cls in rep.recurrent:
        if len(cls) > 1:
            members = sorted(cls, key=graph.nodes.index)
            lines.append(
                f"recurrent class of size {len(cls)}: " + ", ".join(fmt(p) for p in members)
            )
    lines.append(f"transient: {len(rep.transient)} of {len(graph.nodes)} structures")
    for p in graph.nodes:
        blocks = [f"{{{v.format_set(c)}}}" for c, _ in graph.out_edges(p)]
        lines.append(f"  {fmt(p)} blocked by: {', '.join(blocks) if blocks else '-'}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _grid(step: float) -> list[float]:
    if not 0 < step <= 1:
        raise UsageError("--grid must be a step in (0, 1]")
    n = round(1 / step)
    if abs(n * step - 1) > 1e-9:
        raise UsageError("--grid step must divide 1")
    return [k / n for k in range(n + 1)]


def cmd_fluid(args) -> int:
    game = load(args.file)
    base = game.quadrature_config()
    cfg = base if args.tolerance is None else QuadratureConfig(**{**base.__dict__, "tol": args.tolerance})
    model = game.fluid_model(cfg)
    names = [n for n in (args.coalition or "").replace(",", " ").split() if n]
    if not names:
        raise UsageError("--coalition needs at least one provider")
    zbar = model.key(names)
    weights = {k: float(x) for k, x in _weights(game, args).items()}
    kind = args.value
    if kind not in ("ad", "chi"):
        raise UsageError("fluid payoffs use --value ad or chi")
    xs = _grid(args.grid)

    def row(x: float):
        try:
            pay = model.ad(zbar, x) if kind == "ad" else model.chi(zbar, x, weights)
            return [pay.providers[p] for p in zbar] + [pay.peer], None
        except (QuadratureError, ExprDomainError) as exc:
            return [math.nan] * (len(zbar) + 1), f"x={x:.6g}: {exc}"

    if kind == "chi":
        model.shapley()  # shared by every row; compute once up front
    with ThreadPoolExecutor(max_workers=min(_threads(), len(xs))) as pool:
        results = list(pool.map(row, xs))
    header = ["x"] + [f"{kind}_{p}" for p in zbar] + [f"{kind}_peer"]
    lines = [",".join(header)]
    failed = []
    for x, (vals, err) in zip(xs, results):
        lines.append(",".join([repr(x)] + [repr(float(y)) for y in vals]))
        if err:
            failed.append(err)
    _emit("\n".join(lines) + "\n", args.out)
    for msg in failed:
        print(f"error: {msg}", file=sys.stderr)
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_dtn(args) -> int:
    game = load(args.file)
    p, q = game.dtn_params()
    base = game.quadrature_config()
    cfg = base if args.tolerance is None else QuadratureConfig(**{**base.__dict__, "tol": args.tolerance})
    weights = {k: float(x) for k, x in _weights(game, args).items()} or None
    ad = dtn_mod.scenario(p, q, "ad", cfg=cfg)
    chi = dtn_mod.scenario(p, q, "chi", weights=weights, cfg=cfg)
    lines = []
    for rep, label in ((ad, "A-D"), (chi, "chi")):
        lines.append(f"[{label}]")
        lines += ["  " + s for s in rep.lines()]

    def verdict(rep) -> str:
        return "yes" if rep.split.monopoly else "no"

    top = max(ad.allocation, key=ad.allocation.get)
    lines.append(
        f"{top} takes {ad.allocation[top]:.3f} of free users; "
        f"monopoly: {verdict(ad)} (A-D), {verdict(chi)} (chi)"
    )
    better = "yes" if chi.peer_payoff >= ad.peer_payoff else "no"
    lines.append(f"per-peer chi payoff >= A-D payoff: {better}")
    sys.stdout.write("\n".join(lines) + "\n")
    if args.out:
        _emit(dtn_mod.cost_table(p, q), args.out)
    return EXIT_OK


def cmd_check_axioms(args) -> int:
    game = load(args.file)
    v, part = _partition(game, args.partition)
    kind = ValueKind(args.value)
    if kind is ValueKind.SHAPLEY:
        part = Partition.grand(v.n)
    phi = value(v, part, kind, _weights(game, args) or None)
    rep = check_axioms(v, part, phi)
    lines = [f"partition: {v.format_partition(part)}"]
    for name in ("ce", "cs", "np", "gnp"):
        lines.append(f"{name.upper()}: {'pass' if getattr(rep, name) else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_CHECK if rep.failures() else EXIT_OK


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="coalition-forge",
        description="Payoffs, stability and peer allocation in peer-assisted services.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, values=("shapley", "ad", "chi"), default="ad"):
        p.add_argument("file", help="game file (JSON) or a bundled name such as example3.json")
        p.add_argument("--value", choices=values, default=default)
        p.add_argument("--weights", help="comma-separated name=weight list")
        p.add_argument("--out", help="write the main output here instead of stdout")

    p = sub.add_parser("payoff", help="payoff vector of a partition")
    common(p)
    p.add_argument("--partition", help='partition such as "{p1 n1 | p2 n2}" (default: grand)')
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.set_defaults(func=cmd_payoff)

    p = sub.add_parser("dynamics", help="blocking dynamics over all partitions")
    common(p, ("ad", "chi"))
    p.add_argument("--format", choices=("report", "edges", "dot"), default="report")
    p.add_argument("--residual", choices=("keep", "scatter"), default="keep",
                   help="what remains of a block that loses members")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("fluid", help="many-peer payoff curves as CSV")
    common(p, ("ad", "chi"))
    p.add_argument("--coalition", help="providers in the coalition, comma separated")
    p.add_argument("--grid", type=float, default=0.1, help="step of the x grid")
    p.add_argument("--tolerance", type=float, help="absolute quadrature tolerance")
    p.set_defaults(func=cmd_fluid)

    p = sub.add_parser("dtn", help="two-provider network scenario")
    p.add_argument("file")
    p.add_argument("--weights", help="provider weights for the chi value")
    p.add_argument("--tolerance", type=float, help="absolute quadrature tolerance")
    p.add_argument("--out", help="write the cost-curve CSV here")
    p.set_defaults(func=cmd_dtn)

    p = sub.add_parser("check-axioms", help="check CE, CS, NP and GNP for a payoff")
    common(p)
    p.add_argument("--partition", help="partition (default: grand)")
    p.set_defaults(func=cmd_check_axioms)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (QuadratureError, ExprDomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (GameFileError, GameStructureError, ExprSyntaxError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
