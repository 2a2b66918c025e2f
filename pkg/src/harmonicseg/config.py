"""Run configuration shared by the CLI commands."""

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class RunConfig:
    l_max: int = 5
    n_orientations: int = 5000
    t_det: float = 0.5
    d_min: int = 10
    lambda_dist: float = 0.5
    lambda_harm: float = 0.5
    seed: int = 0

    @classmethod
    def from_json(cls, path):
        doc = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**doc)

    def updated(self, **overrides):
        """New config with the non-None overrides applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes)
