"""Run configuration shared by the CLI commands.

Every output file embeds the configuration it was produced with, so runs
are reproducible from the artifacts alone.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional


@dataclass
class Config:
    eps: float = 0.1                # boundary smoothing for relation scoring
    theta_pre: float = 0.999       # pre-assignment / subtask-split threshold
    margin: float = 0.05           # slack enforced on strict Allen inequalities
    min_length: float = 0.2        # shortest executable action, seconds
    k_max: int = 5                 # GMM component cap before BIC selection
    seed: int = 0
    l_max: int = 5                 # symbolic planner: max units per action
    horizon_factor: int = 4        # symbolic planner: grid length per action
    unit: float = 1.0              # seconds per symbolic grid step
    gap: float = 1.0               # seconds between subtask blocks
    px_per_second: float = 40.0
    bench_sample_interval: float = 0.25
    bench_time_limit: Optional[float] = None

    def validate(self) -> None:
        for name in ("eps", "margin", "min_length", "unit", "gap"):
            if getattr(self, name) < 0:
                raise ValueError(f"config.{name} must be non-negative")
        if not (0 < self.theta_pre <= 1):
            raise ValueError("config.theta_pre must be in (0, 1]")
        if self.k_max < 1 or self.l_max < 1 or self.horizon_factor < 1:
            raise ValueError("config counts must be positive")
        if self.margin >= self.unit:
            raise ValueError("config.margin must be below the grid unit")
        if self.min_length > self.unit:
            raise ValueError("config.min_length must not exceed the grid unit")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(doc: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(Config)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = Config(**doc)
        cfg.validate()
        return cfg

    @staticmethod
    def load(path) -> "Config":
        with open(path) as f:
            return Config.from_dict(json.load(f))

    def replaced(self, **overrides) -> "Config":
        updates = {k: v for k, v in overrides.items() if v is not None}
        cfg = dataclasses.replace(self, **updates)
        cfg.validate()
        return cfg
