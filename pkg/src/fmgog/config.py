"""Experiment configuration: YAML document <-> validated dataclasses."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .cost import CostModel
from .fm import FmParams, GainBounds
from .game import GameConfig
from .topology import Topology, generate


def _numbers(v) -> np.ndarray | None:
    """Finite scalar or nonempty list of finite numbers as an array, else None."""
    items = v if isinstance(v, list) else [v]
    if not items or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in items):
        return None
    arr = np.asarray(items, dtype=float)
    return arr if np.all(np.isfinite(arr)) else None


def _coerce(v):
    """YAML 1.1 reads ``1e-4`` (no dot) as a string; turn such strings into floats."""
    if isinstance(v, list):
        return [_coerce(x) for x in v]
    if isinstance(v, dict):
        return {k: _coerce(x) for k, x in v.items()}
    if isinstance(v, str):
        try:
            return float(v)
        except ValueError:
            return v
    return v


class ConfigError(ValueError):
    """All problems found in one pass over a configuration document."""

    def __init__(self, problems: list[str]):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclasses.dataclass
class TopologySpec:
    file: str | None = None
    n1: int = 11
    n2: int = 11
    p1: float = 0.2
    p2: float = 0.45
    n_cross: int = 3
    seed: int = 0


@dataclasses.dataclass
class FmSpec:
    k: Any = 1.0  # scalar or per-node list
    gamma_bar: Any = 1.0
    nu: Any = 1.0


@dataclasses.dataclass
class CostSpec:
    p: float = 0.1
    q: float = 1.0
    g_lo: float = 0.1
    g_hi: float = 0.9
    h_lo: float = 4.0
    h_hi: float = 6.0


@dataclasses.dataclass
class GameSpec:
    c1: int = 2
    c2: int = 3
    tol: float = 1e-4
    varsigma: float = 0.01
    q1_bar: float = 2.25
    q2_bar: Any = 0.0  # number, or "qmax" for the certified maximum
    q2_grid: Any = None  # list of values, or {"points": n} for an even grid on [0, q2*]
    max_cycles: int = 200


@dataclasses.dataclass
class RobustSpec:
    eps1: float = 0.5
    eps2: float = 0.5
    sigma1: float = 0.01
    sigma2: float = 0.01
    samples: int = 1000


@dataclasses.dataclass
class SimulateSpec:
    g: Any = None  # default: midpoint of the gain box
    h: Any = None
    p0: Any = 0.0
    tol: float = 1e-10
    max_steps: int = 1_000_000
    record: bool = False


@dataclasses.dataclass
class ExperimentConfig:
    topology: TopologySpec = dataclasses.field(default_factory=TopologySpec)
    fm: FmSpec = dataclasses.field(default_factory=FmSpec)
    cost: CostSpec = dataclasses.field(default_factory=CostSpec)
    game: GameSpec = dataclasses.field(default_factory=GameSpec)
    robust: RobustSpec = dataclasses.field(default_factory=RobustSpec)
    simulate: SimulateSpec = dataclasses.field(default_factory=SimulateSpec)
    seed: int = 0
    workers: int = 1

    # ------------------------------------------------------------------ io

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    @classmethod
    def from_dict(cls, doc: dict | None) -> "ExperimentConfig":
        doc = {} if doc is None else doc
        problems: list[str] = []
        if not isinstance(doc, dict):
            raise ConfigError(["top level must be a mapping"])
        sections = {f.name: f for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in doc.items():
            if key not in sections:
                problems.append(f"unknown key '{key}'")
                continue
            f = sections[key]
            if key in ("seed", "workers"):
                kwargs[key] = value
                continue
            if key != "topology" or not isinstance(value, dict):
                value = _coerce(value)
            else:
                value = {k: (v if k == "file" else _coerce(v)) for k, v in value.items()}
            sub_cls = f.default_factory().__class__
            if value is None:
                value = {}
            if not isinstance(value, dict):
                problems.append(f"'{key}' must be a mapping")
                continue
            names = {g.name for g in dataclasses.fields(sub_cls)}
            for k in value:
                if k not in names:
                    problems.append(f"unknown key '{key}.{k}'")
            kwargs[key] = sub_cls(**{k: v for k, v in value.items() if k in names})
        cfg = cls(**kwargs)
        problems += cfg.problems()
        if problems:
            raise ConfigError(problems)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                doc = yaml.safe_load(fh)
            except yaml.YAMLError as exc:
                raise ConfigError([f"cannot parse {path}: {exc}"]) from None
        return cls.from_dict(doc)

    # ------------------------------------------------------------ checking

    def problems(self) -> list[str]:
        out: list[str] = []

        def need(cond, msg):
            if not cond:
                out.append(msg)

        def num(v):
            return isinstance(v, (int, float)) and not isinstance(v, bool) and np.isfinite(v)

        def integer(v):
            return isinstance(v, int) and not isinstance(v, bool)

        t = self.topology
        if t.file is None:
            need(integer(t.n1) and t.n1 >= 1, "topology.n1 must be a positive integer")
            need(integer(t.n2) and t.n2 >= 1, "topology.n2 must be a positive integer")
            for name in ("p1", "p2"):
                v = getattr(t, name)
                need(num(v) and 0 < v <= 1, f"topology.{name} must lie in (0, 1]")
            need(integer(t.n_cross) and t.n_cross >= 1, "topology.n_cross must be a positive integer")
            need(integer(t.seed) and t.seed >= 0, "topology.seed must be a nonnegative integer")
        else:
            need(isinstance(t.file, str), "topology.file must be a path")

        for name in ("k", "gamma_bar", "nu"):
            need(_numbers(getattr(self.fm, name)) is not None, f"fm.{name} must be a number or a list of numbers")
        ks = _numbers(self.fm.k)
        if ks is not None:
            need(np.all((ks > 0) & (ks <= 1)), "fm.k entries must lie in (0, 1]")

        c = self.cost
        for name in ("p", "q", "g_lo", "g_hi", "h_lo", "h_hi"):
            need(num(getattr(c, name)) and getattr(c, name) > 0, f"cost.{name} must be a positive number")
        if all(num(getattr(c, n)) for n in ("g_lo", "g_hi", "h_lo", "h_hi")):
            need(c.g_lo < c.g_hi, "cost.g_lo must be below cost.g_hi")
            need(c.h_lo < c.h_hi, "cost.h_lo must be below cost.h_hi")

        g = self.game
        need(integer(g.c1) and g.c1 >= 1, "game.c1 must be a positive integer")
        need(integer(g.c2) and g.c2 >= 1, "game.c2 must be a positive integer")
        need(num(g.tol) and g.tol > 0, "game.tol must be positive")
        need(num(g.varsigma) and 0 < g.varsigma < 1, "game.varsigma must lie in (0, 1)")
        need(num(g.q1_bar) and g.q1_bar >= 0, "game.q1_bar must be nonnegative")
        need((num(g.q2_bar) and g.q2_bar >= 0) or g.q2_bar == "qmax",
             "game.q2_bar must be a nonnegative number or 'qmax'")
        need(integer(g.max_cycles) and g.max_cycles >= 1, "game.max_cycles must be a positive integer")
        if g.q2_grid is not None:
            if isinstance(g.q2_grid, dict):
                pts = g.q2_grid.get("points")
                need(set(g.q2_grid) == {"points"} and integer(pts) and pts >= 2,
                     "game.q2_grid as a mapping needs exactly one integer key 'points' >= 2")
            elif isinstance(g.q2_grid, list) and _numbers(g.q2_grid) is not None:
                arr = _numbers(g.q2_grid)
                need(np.all(arr >= 0), "game.q2_grid values must be nonnegative")
                need(np.all(np.diff(arr) > 0), "game.q2_grid must be strictly increasing")
            else:
                out.append("game.q2_grid must be a list of numbers or {points: n}")

        r = self.robust
        for name in ("eps1", "eps2"):
            need(num(getattr(r, name)) and getattr(r, name) > 0, f"robust.{name} must be positive")
        for name in ("sigma1", "sigma2"):
            need(num(getattr(r, name)) and 0 < getattr(r, name) < 1, f"robust.{name} must lie in (0, 1)")
        need(integer(r.samples) and r.samples >= 1, "robust.samples must be a positive integer")

        s = self.simulate
        for name in ("g", "h"):
            v = getattr(s, name)
            need(v is None or _numbers(v) is not None, f"simulate.{name} must be null, a number or a list of numbers")
        need(_numbers(s.p0) is not None, "simulate.p0 must be a number or a list of numbers")
        need(num(s.tol) and s.tol > 0, "simulate.tol must be positive")
        need(integer(s.max_steps) and s.max_steps >= 1, "simulate.max_steps must be a positive integer")
        need(isinstance(s.record, bool), "simulate.record must be true or false")

        need(integer(self.seed) and self.seed >= 0, "seed must be a nonnegative integer")
        need(integer(self.workers) and self.workers >= 1, "workers must be a positive integer")
        return out

    # -------------------------------------------------------------- builders

    def build_topology(self, base_dir: Path | None = None) -> Topology:
        t = self.topology
        if t.file is not None:
            path = Path(t.file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            with open(path) as fh:
                return Topology.from_document(yaml.safe_load(fh))
        return generate(t.n1, t.n2, t.p1, t.p2, n_cross=t.n_cross, seed=t.seed)

    def bounds(self) -> GainBounds:
        c = self.cost
        return GainBounds(c.g_lo, c.g_hi, c.h_lo, c.h_hi)

    def cost_model(self) -> CostModel:
        return CostModel(self.cost.p, self.cost.q, self.bounds())

    def fm_params(self, n: int) -> FmParams:
        def vec(v, name):
            a = np.atleast_1d(np.asarray(v, dtype=float))
            if a.size == 1:
                return np.full(n, a[0])
            if a.size != n:
                raise ConfigError([f"fm.{name} has {a.size} entries for {n} nodes"])
            return a

        return FmParams(vec(self.fm.k, "k"), vec(self.fm.gamma_bar, "gamma_bar"), vec(self.fm.nu, "nu"))

    def game_config(self, q2_bar: float | None = None) -> GameConfig:
        g = self.game
        q2 = g.q2_bar if q2_bar is None else q2_bar
        if not isinstance(q2, (int, float)):
            raise ValueError("q2_bar must be resolved to a number first")
        return GameConfig(g.c1, g.c2, g.tol, g.varsigma, g.q1_bar, float(q2), g.max_cycles)
