"""Configs, reports, seed derivation and ordered parallel replication."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

MASK64 = (1 << 64) - 1
EXPERIMENT_IDS = ("E1", "E2", "E3", "E4", "E5", "E6", "E7")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *parts: int) -> int:
    """Fold ``parts`` into ``master_seed`` one SplitMix64 step at a time."""
    s = splitmix64(int(master_seed) & MASK64)
    for p in parts:
        s = splitmix64(s ^ (int(p) & MASK64))
    return s


def experiment_ordinal(experiment_id: str) -> int:
    return EXPERIMENT_IDS.index(experiment_id) + 1


@dataclass(frozen=True)
class ExperimentConfig:
    experiment_id: str
    n: int
    k: int
    replicates: int
    master_seed: int = 0
    tau: float | None = None
    budget: int | None = None
    output_dir: str | None = None
    n_grid: tuple[int, ...] | None = None
    thresholds: dict[str, float] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment_id not in EXPERIMENT_IDS:
            raise ValueError(f"unknown experiment {self.experiment_id!r}")
        if self.n < 1 or self.k < 1 or self.k > self.n:
            raise ValueError(f"need 1 <= k <= n, got n = {self.n}, k = {self.k}")
        if self.replicates < 1:
            raise ValueError("replicates must be positive")
        if not 0 <= self.master_seed <= MASK64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.n_grid is not None:
            object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))

    def replicate_seed(self, r: int, *extra: int) -> int:
        return derive_seed(self.master_seed, experiment_ordinal(self.experiment_id), r, *extra)

    def threshold(self, name: str, default: float) -> float:
        return float(self.thresholds.get(name, default))

    def echo(self) -> dict[str, Any]:
        out = asdict(self)
        if out["n_grid"] is not None:
            out["n_grid"] = list(out["n_grid"])
        return out


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    threshold: Any
    comparison: str
    passed: bool
    provenance: str = ""

    @classmethod
    def at_most(cls, name, measured, limit, provenance=""):
        return cls(name, float(measured), float(limit), "<=", bool(measured <= limit), provenance)

    @classmethod
    def at_least(cls, name, measured, limit, provenance=""):
        return cls(name, float(measured), float(limit), ">=", bool(measured >= limit), provenance)

    @classmethod
    def within(cls, name, measured, lo, hi, provenance=""):
        return cls(name, float(measured), [float(lo), float(hi)], "in", bool(lo <= measured <= hi), provenance)


@dataclass
class ExperimentReport:
    experiment_id: str
    config: dict[str, Any]
    fields: list[str]
    records: list[dict[str, Any]]
    summary: dict[str, Any]
    checks: list[Check]
    plot_sample: np.ndarray | None = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict[str, Any]:
        return _json_safe({
            "experiment_id": self.experiment_id,
            "config": self.config,
            "summary": self.summary,
            "checks": [asdict(c) for c in self.checks],
            "passed": self.passed,
            "replicate_fields": self.fields,
            "n_records": len(self.records),
        })


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def run_ordered(task: Callable[[Any], Any], items: Sequence[Any], threads: int = 1) -> list[Any]:
    """Map ``task`` over ``items``; results come back in item order for any thread count."""
    if threads <= 1:
        return [task(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, items))


def flatten(groups: Iterable[list[dict[str, Any]]]) -> list[dict[str, Any]]:
    return [row for g in groups for row in g]
