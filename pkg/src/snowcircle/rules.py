"""Dyadic diameter functions given by keep/halve decisions.

A rule attaches one decision to every interval of level ``< depth``.  The
decision governs both children: *keep* gives them the parent's value, *halve*
gives them half of it.  Beyond the explicit table every decision is halve, so
``delta(I) = 2**-(number of halve decisions on the path from the root to I)``.

Values are handled internally as integer halve counts ("exponents"); the
public accessors return :class:`~snowcircle.dyadic.Dyadic`.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .dyadic import ARC, CIRCLE, Dyadic, DyadicInterval, Topology

DEFAULT_MAX_DEPTH = 16


def max_depth() -> int:
    """Depth budget, overridable through ``SNOWCIRCLE_MAX_DEPTH``."""
    raw = os.environ.get("SNOWCIRCLE_MAX_DEPTH")
    if raw is None:
        return DEFAULT_MAX_DEPTH
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"SNOWCIRCLE_MAX_DEPTH must be an integer, got {raw!r}") from None
    if value < 1:
        raise ValueError("SNOWCIRCLE_MAX_DEPTH must be positive")
    return value


class RuleError(ValueError):
    """Invalid rule parameters or rule file."""


def _longest_keep_run(keeps: list[np.ndarray]) -> int:
    run = np.zeros(1, dtype=np.int64)
    best = 0
    for level_keeps in keeps:
        run = np.where(level_keeps, run + 1, 0)
        best = max(best, int(run.max(initial=0)))
        run = np.repeat(run, 2)
    return best


@dataclass(frozen=True, eq=False)
class DiameterRule:
    """Keep/halve decision table of finite depth with an all-halve tail.

    ``keeps[m]`` is a boolean array of length ``2**m`` for ``m < depth``.
    """

    topology: Topology
    depth: int
    keeps: tuple[np.ndarray, ...]
    max_consecutive_keeps: int
    seed_info: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "topology", Topology.parse(self.topology))
        if self.depth < 0:
            raise RuleError("depth must be nonnegative")
        if len(self.keeps) != self.depth:
            raise RuleError("one decision array per level below depth is required")
        frozen = []
        for m, arr in enumerate(self.keeps):
            arr = np.asarray(arr, dtype=bool)
            if arr.shape != (1 << m,):
                raise RuleError(f"level {m} needs {1 << m} decisions, got shape {arr.shape}")
            arr = arr.copy()
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "keeps", tuple(frozen))
        cap = self.max_consecutive_keeps
        if not isinstance(cap, (int, np.integer)) or cap < 0:
            raise RuleError("max_consecutive_keeps must be a nonnegative integer")
        run = _longest_keep_run(frozen)
        if run > cap:
            raise RuleError(f"rule has {run} consecutive keeps, exceeding the cap {cap}")

    # exponent tables

    def exponents(self, level: int) -> np.ndarray:
        """Halve counts of all intervals at ``level`` (``delta = 2**-e``)."""
        table = self._exponent_table
        if level < len(table):
            return table[level]
        base = table[-1]
        extra = level - (len(table) - 1)
        return np.repeat(base, 1 << extra) + extra

    @cached_property
    def _exponent_table(self) -> list[np.ndarray]:
        e = np.zeros(1, dtype=np.int64)
        table = [e]
        for m in range(self.depth):
            e = np.repeat(e + (~self.keeps[m]), 2)
            e.setflags(write=False)
            table.append(e)
        return table

    def truncated_exponents(self, n: int | None, level: int) -> np.ndarray:
        """Halve counts under the truncated function ``delta_n`` (``n=None`` is the full one)."""
        if n is None or level <= n:
            return self.exponents(level)
        return np.repeat(self.exponents(n), 1 << (level - n)) + (level - n)

    def keep_at(self, interval: DyadicInterval) -> bool:
        if interval.level >= self.depth:
            return False
        return bool(self.keeps[interval.level][interval.index])

    def keep_mask(self, level: int) -> np.ndarray:
        if level >= self.depth:
            return np.zeros(1 << level, dtype=bool)
        return self.keeps[level]

    # public values

    def delta(self, interval: DyadicInterval) -> Dyadic:
        return Dyadic.power(int(self.exponents(interval.level)[interval.index]))

    def delta_truncated(self, n: int, interval: DyadicInterval) -> Dyadic:
        if n < 0:
            raise RuleError("truncation level must be nonnegative")
        e = self.truncated_exponents(n, interval.level)[interval.index]
        return Dyadic.power(int(e))

    def max_level_exponent(self, n: int) -> int:
        table = self._exponent_table
        if n < len(table):
            return int(table[n].min())
        return int(table[-1].min()) + n - (len(table) - 1)

    def max_level_diameter(self, n: int) -> Dyadic:
        """``M(n)``, the largest value over the level-``n`` intervals."""
        return Dyadic.power(self.max_level_exponent(n))

    @property
    def is_uniform(self) -> bool:
        return not any(k.any() for k in self.keeps)

    @property
    def folded_levels(self) -> list[int]:
        return [m for m, k in enumerate(self.keeps) if k.any()]

    # serialization

    def to_dict(self) -> dict:
        decisions = {}
        for m, arr in enumerate(self.keeps):
            for i, keep in enumerate(arr):
                decisions[f"{m}:{i}"] = "keep" if keep else "halve"
        return {
            "topology": self.topology.value,
            "depth": self.depth,
            "decisions": decisions,
            "tail": "halve",
            "max_consecutive_keeps": int(self.max_consecutive_keeps),
            "seed_info": self.seed_info,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=False) + "\n"

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def from_dict(cls, data: dict) -> "DiameterRule":
        if not isinstance(data, dict):
            raise RuleError("rule file must hold a JSON object")
        try:
            topology = Topology.parse(data["topology"])
            depth = data["depth"]
            decisions = data.get("decisions", {})
            cap = data["max_consecutive_keeps"]
        except (KeyError, ValueError) as exc:
            raise RuleError(f"malformed rule: {exc}") from None
        if not isinstance(depth, int) or depth < 0:
            raise RuleError("depth must be a nonnegative integer")
        if depth > max_depth():
            raise RuleError(f"depth {depth} exceeds the configured maximum {max_depth()}")
        if data.get("tail", "halve") != "halve":
            raise RuleError("only the all-halve tail is supported")
        if not isinstance(decisions, dict):
            raise RuleError("decisions must be an object")
        keeps = [np.zeros(1 << m, dtype=bool) for m in range(depth)]
        for label, value in decisions.items():
            try:
                interval = DyadicInterval.parse(label)
            except ValueError as exc:
                raise RuleError(str(exc)) from None
            if interval.level >= depth:
                raise RuleError(f"decision {label} lies below the declared depth {depth}")
            if value not in ("keep", "halve"):
                raise RuleError(f"decision {label} must be 'keep' or 'halve', got {value!r}")
            keeps[interval.level][interval.index] = value == "keep"
        seed_info = data.get("seed_info", {})
        if not isinstance(seed_info, dict):
            raise RuleError("seed_info must be an object")
        return cls(topology, depth, tuple(keeps), cap, seed_info)

    @classmethod
    def from_json(cls, text: str) -> "DiameterRule":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise RuleError(f"rule file is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DiameterRule":
        return cls.from_json(Path(path).read_text())

    @cached_property
    def hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, DiameterRule):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(self.hash)

    def __repr__(self):
        kind = self.seed_info.get("kind", "custom")
        return f"DiameterRule({kind}, {self.topology.value}, depth={self.depth}, hash={self.hash[:10]})"


def _check_depth(depth: int) -> None:
    if depth < 0:
        raise RuleError("depth must be nonnegative")
    if depth > max_depth():
        raise RuleError(f"depth {depth} exceeds the configured maximum {max_depth()}")


def uniform_halve(depth: int, topology: Topology | str = CIRCLE) -> DiameterRule:
    _check_depth(depth)
    keeps = tuple(np.zeros(1 << m, dtype=bool) for m in range(depth))
    return DiameterRule(topology, depth, keeps, 0, {"kind": "uniform-halve"})


def periodic_keep(period: int, depth: int, topology: Topology | str = CIRCLE) -> DiameterRule:
    """Keep at every level divisible by ``period``, halve elsewhere."""
    _check_depth(depth)
    if period < 1:
        raise RuleError("period must be positive")
    keeps = tuple(np.full(1 << m, m % period == 0) for m in range(depth))
    cap = _longest_keep_run(list(keeps))
    return DiameterRule(topology, depth, keeps, cap, {"kind": "periodic-keep", "period": period})


def keep_at_root(depth: int, topology: Topology | str = CIRCLE) -> DiameterRule:
    """Keep at the root only; halve everywhere else."""
    _check_depth(depth)
    if depth < 1:
        raise RuleError("keep-at-root needs depth at least 1")
    keeps = [np.zeros(1 << m, dtype=bool) for m in range(depth)]
    keeps[0][0] = True
    return DiameterRule(topology, depth, tuple(keeps), 1, {"kind": "keep-at-root"})


def seeded_random(p: float, seed: int, cap: int, depth: int,
                  topology: Topology | str = CIRCLE) -> DiameterRule:
    """Keep each interval independently with probability ``p``, forcing halve once the cap is reached."""
    _check_depth(depth)
    if not 0 <= p < 1:
        raise RuleError("keep probability must lie in [0, 1)")
    if cap < 0 or (cap == 0 and p > 0):
        raise RuleError("max_consecutive_keeps must be positive when keep decisions are requested")
    rng = np.random.default_rng(seed)
    run = np.zeros(1, dtype=np.int64)
    keeps = []
    for m in range(depth):
        draw = rng.random(1 << m) < p
        keep = draw & (run < cap)
        keeps.append(keep)
        run = np.repeat(np.where(keep, run + 1, 0), 2)
    info = {"kind": "seeded-random", "keep_probability": p, "seed": seed, "cap": cap}
    return DiameterRule(topology, depth, tuple(keeps), cap, info)


def generate(kind: str, depth: int, topology: Topology | str = CIRCLE, **params) -> DiameterRule:
    """Build a rule from a generator name and its parameters."""
    if kind == "uniform-halve":
        return uniform_halve(depth, topology)
    if kind == "periodic-keep":
        return periodic_keep(int(params.get("period", 2)), depth, topology)
    if kind == "keep-at-root":
        return keep_at_root(depth, topology)
    if kind == "seeded-random":
        return seeded_random(float(params.get("p", 0.5)), int(params.get("seed", 0)),
                             int(params.get("cap", 3)), depth, topology)
    raise RuleError(f"unknown generator {kind!r}")


def seeded_corpus(count: int, depth: int, topology: Topology | str = CIRCLE,
                  base_seed: int = 0, p: float = 0.5, cap: int = 3) -> list[DiameterRule]:
    """``count`` reproducible random rules with consecutive seeds."""
    return [seeded_random(p, base_seed + i, cap, depth, topology) for i in range(count)]


__all__ = [
    "ARC", "CIRCLE", "DiameterRule", "RuleError", "generate", "keep_at_root",
    "max_depth", "periodic_keep", "seeded_corpus", "seeded_random", "uniform_halve",
]
