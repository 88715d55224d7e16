"""JSON game files.

Every file carries ``"schema": "coalition-forge/1"`` and a ``mode``:

``worth-table``
    ``providers`` and ``peers`` (name lists) or ``players``, plus ``worth``
    mapping space-separated coalitions to numbers or fraction strings. With
    ``"extend": "coalescent"`` the entries are single-provider worths and
    every other coalition takes the best split of its peers.
``cost-curves``
    ``providers`` mapping names to cost expressions in ``x``, ``eta`` peers
    and optional shared ``params``.
``fluid``
    ``providers`` mapping names to normalized cost expressions on [0, 1].
``dtn``
    ``providers`` mapping names to ``{"lambda", "g", "x0"}`` objects.

``weights`` and ``quadrature`` are optional in every mode.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .dtn import DtnParams
from .expr import CostCurve, parse
from .fluid import FluidCost, FluidModel, QuadratureConfig
from .game import DEFAULT_MAX_PLAYERS, Player, Role, WorthFunction, check_capacity
from .peer_worth import PeerGameSpec, build_worth_function

__all__ = ["SCHEMA", "MODES", "GameFile", "GameFileError", "load", "loads", "bundled"]

SCHEMA = "coalition-forge/1"
MODES = ("worth-table", "cost-curves", "fluid", "dtn")
BUNDLED = ("example1.json", "example2.json", "example3.json", "dtn.json")


class GameFileError(ValueError):
    pass


def _fraction(value: Any, where: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise GameFileError(f"{where}: expected a number, got {value!r}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise GameFileError(f"{where}: not a number: {value!r}") from exc


def _names(value: Any, where: str) -> tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(n, str) and n for n in value):
        raise GameFileError(f"{where}: expected a list of names")
    if len(set(value)) != len(value):
        raise GameFileError(f"{where}: duplicate names")
    return tuple(value)


@dataclass(frozen=True)
class GameFile:
    mode: str
    providers: tuple[str, ...] = ()
    peers: tuple[str, ...] = ()
    worth: tuple[tuple[str, Fraction], ...] = ()
    extend: str | None = None
    curves: tuple[tuple[str, str], ...] = ()
    params: tuple[tuple[str, Fraction], ...] = ()
    eta: int | None = None
    dtn: tuple[tuple[str, Fraction, Fraction, Fraction], ...] = ()
    weights: tuple[tuple[str, Fraction], ...] = ()
    quadrature: tuple[tuple[str, float], ...] = ()
    _memo: dict = field(default_factory=dict, compare=False, repr=False)

    # -- loading -------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GameFile":
        if not isinstance(data, Mapping):
            raise GameFileError("game file must be a JSON object")
        if data.get("schema") != SCHEMA:
            raise GameFileError(f"unsupported schema {data.get('schema')!r}; expected {SCHEMA!r}")
        mode = data.get("mode")
        if mode not in MODES:
            raise GameFileError(f"mode must be one of {', '.join(MODES)}")
        known = {"schema", "mode", "providers", "peers", "players", "worth", "extend",
                 "params", "eta", "weights", "quadrature", "description"}
        extra = set(data) - known
        if extra:
            raise GameFileError(f"unknown field {sorted(extra)[0]!r}")
        kw: dict[str, Any] = {"mode": mode}
        if "weights" in data:
            w = data["weights"]
            if not isinstance(w, Mapping):
                raise GameFileError("weights: expected an object")
            kw["weights"] = tuple((k, _fraction(x, f"weights.{k}")) for k, x in w.items())
        if "quadrature" in data:
            q = data["quadrature"]
            if not isinstance(q, Mapping):
                raise GameFileError("quadrature: expected an object")
            allowed = set(QuadratureConfig.__dataclass_fields__)
            for k in q:
                if k not in allowed:
                    raise GameFileError(f"quadrature: unknown setting {k!r}")
            kw["quadrature"] = tuple(sorted((k, q[k]) for k in q))
        if mode == "worth-table":
            cls._load_table(data, kw)
        elif mode == "dtn":
            cls._load_dtn(data, kw)
        else:
            cls._load_curves(data, kw, mode)
        game = cls(**kw)
        game.validate()
        return game

    @staticmethod
    def _load_table(data, kw) -> None:
        if "players" in data:
            kw["peers"] = _names(data["players"], "players")
        else:
            kw["providers"] = _names(data.get("providers", []), "providers")
            kw["peers"] = _names(data.get("peers", []), "peers")
        if not kw.get("providers") and not kw.get("peers"):
            raise GameFileError("worth-table mode needs players")
        worth = data.get("worth", {})
        if not isinstance(worth, Mapping):
            raise GameFileError("worth: expected an object")
        kw["worth"] = tuple((" ".join(k.split()), _fraction(x, f"worth[{k!r}]")) for k, x in worth.items())
        extend = data.get("extend")
        if extend not in (None, "coalescent"):
            raise GameFileError("extend must be 'coalescent' when given")
        kw["extend"] = extend

    @staticmethod
    def _load_curves(data, kw, mode) -> None:
        provs = data.get("providers")
        if not isinstance(provs, Mapping) or not provs:
            raise GameFileError(f"{mode} mode needs a providers object of cost expressions")
        for name, src in provs.items():
            if not isinstance(src, str):
                raise GameFileError(f"providers.{name}: expected an expression string")
        params = data.get("params", {})
        if not isinstance(params, Mapping):
            raise GameFileError("params: expected an object")
        kw["params"] = tuple((k, _fraction(x, f"params.{k}")) for k, x in params.items())
        env = {k: float(x) for k, x in kw["params"]}
        kw["providers"] = tuple(provs)
        # keep the canonical spelling so that dump and reload agree exactly
        kw["curves"] = tuple(
            (n, parse(src, env, validate=False).canonical()) for n, src in provs.items()
        )
        if mode == "cost-curves":
            eta = data.get("eta")
            if not isinstance(eta, int) or isinstance(eta, bool) or eta < 1:
                raise GameFileError("cost-curves mode needs a positive integer eta")
            kw["eta"] = eta
            if "peers" in data:
                kw["peers"] = _names(data["peers"], "peers")

    @staticmethod
    def _load_dtn(data, kw) -> None:
        provs = data.get("providers")
        if not isinstance(provs, Mapping) or len(provs) != 2:
            raise GameFileError("dtn mode needs exactly two providers")
        rows = []
        for name, p in provs.items():
            if not isinstance(p, Mapping) or set(p) != {"lambda", "g", "x0"}:
                raise GameFileError(f"providers.{name}: expected lambda, g and x0")
            rows.append((name, *(_fraction(p[k], f"providers.{name}.{k}") for k in ("lambda", "g", "x0"))))
        kw["providers"] = tuple(provs)
        kw["dtn"] = tuple(rows)

    def validate(self) -> None:
        """Build everything the mode implies so that errors surface at load."""
        if self.mode == "worth-table":
            self.worth_function()
        elif self.mode == "cost-curves":
            self.peer_spec()
        elif self.mode == "fluid":
            self.curve_map()
        else:
            ps = self.dtn_params()
            if sum(p.x0 for p in ps) > 1:
                raise GameFileError("subscribing fractions x0 sum to more than 1")
        self.quadrature_config()
        self.weight_map()

    # -- canonical form --------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"schema": SCHEMA, "mode": self.mode}
        if self.mode == "worth-table":
            if self.providers:
                out["providers"] = list(self.providers)
            out["peers"] = list(self.peers)
            out["worth"] = {k: str(x) for k, x in self.worth}
            if self.extend:
                out["extend"] = self.extend
        elif self.mode == "dtn":
            out["providers"] = {
                n: {"lambda": str(l), "g": str(g), "x0": str(x0)} for n, l, g, x0 in self.dtn
            }
        else:
            out["providers"] = dict(self.curves)
            if self.params:
                out["params"] = {k: str(x) for k, x in self.params}
            if self.eta is not None:
                out["eta"] = self.eta
            if self.peers:
                out["peers"] = list(self.peers)
        if self.weights:
            out["weights"] = {k: str(x) for k, x in self.weights}
        if self.quadrature:
            out["quadrature"] = dict(self.quadrature)
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    # -- views ---------------------------------------------------------------------

    def weight_map(self) -> dict[str, Fraction]:
        return dict(self.weights)

    def quadrature_config(self) -> QuadratureConfig:
        try:
            return QuadratureConfig(**dict(self.quadrature))
        except (TypeError, ValueError) as exc:
            raise GameFileError(f"quadrature: {exc}") from exc

    def _param_floats(self) -> dict[str, float]:
        return {k: float(x) for k, x in self.params}

    def curve_map(self) -> dict[str, CostCurve]:
        if "curves" not in self._memo:
            self._memo["curves"] = {
                n: parse(src, self._param_floats()) for n, src in self.curves
            }
        return self._memo["curves"]

    def peer_spec(self) -> PeerGameSpec:
        if self.mode == "cost-curves":
            return PeerGameSpec.from_costs(self.curve_map(), self.eta, self.peers or None)
        if self.mode == "worth-table" and self.extend == "coalescent":
            return PeerGameSpec.from_hat_table(
                self.providers, self.peers, {k: x for k, x in self.worth}
            )
        raise GameFileError(f"{self.mode} file does not describe a peer game")

    def worth_function(self, max_players: int | None = None) -> WorthFunction:
        key = ("worth", max_players)
        if key in self._memo:
            return self._memo[key]
        kwargs = {} if max_players is None else {"max_players": max_players}
        if self.mode == "cost-curves" or self.extend == "coalescent":
            v = build_worth_function(self.peer_spec(), **kwargs)
        elif self.mode == "worth-table":
            players = [Player(n, Role.PROVIDER) for n in self.providers] + [
                Player(n, Role.PEER) for n in self.peers
            ]
            check_capacity(len(players), max_players or DEFAULT_MAX_PLAYERS)
            v = WorthFunction.from_entries(players, dict(self.worth))
        else:
            raise GameFileError(f"{self.mode} file has no finite worth function")
        self._memo[key] = v
        return v

    def fluid_model(self, cfg: QuadratureConfig | None = None) -> FluidModel:
        if self.mode != "fluid":
            raise GameFileError(f"{self.mode} file has no fluid costs")
        cfg = cfg or self.quadrature_config()
        return FluidModel([FluidCost(n, c) for n, c in self.curve_map().items()], cfg)

    def dtn_params(self) -> list[DtnParams]:
        if self.mode != "dtn":
            raise GameFileError(f"{self.mode} file has no network parameters")
        return [DtnParams(n, float(l), float(g), float(x0)) for n, l, g, x0 in self.dtn]


def loads(text: str) -> GameFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFileError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return GameFile.from_dict(data)


def load(path: str | Path) -> GameFile:
    """Load a game file; bare bundled names such as ``example3.json`` also work."""
    p = Path(path)
    if not p.exists() and str(path) in BUNDLED:
        return loads(bundled(str(path)))
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise GameFileError(f"cannot read {path}: {exc.strerror}") from exc
    return loads(text)


def bundled(name: str) -> str:
    if name not in BUNDLED:
        raise GameFileError(f"no bundled file {name!r}; choose from {', '.join(BUNDLED)}")
    return resources.files("coalition_forge").joinpath("data").joinpath(name).read_text(encoding="utf-8")
