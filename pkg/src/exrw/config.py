"""Control knobs for extraction, training, and grid search.

Every field is grid-searchable; `lambda_` carries a trailing underscore
only because `lambda` is a Python keyword (JSON uses the bare name).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace


@dataclass
class ControlConfig:
    cl1: float = 1.0
    cl2: float = 1.0
    k: float = 2.0
    c: float = 8.0
    lambda_: float = 0.5
    margin: float = 0.4
    lr_pretrain: float = 1e-4
    lr_rl: float = 1e-6
    seed: int = 0
    max_tn: int = 20
    # Schedule and variant knobs (artifact plumbing, defaults are desk-scale).
    pretrain_epochs: int = 5
    rl_epochs: int = 5
    coherence_epochs: int = 300
    coherence_lr: float = 2.0
    regression_sign: str = "paper"  # {"paper", "penalty"}: sign of the regression term

    def __post_init__(self):
        for name in ("cl1", "cl2", "k", "c", "lambda_"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {value}")
        if not self.margin > 0:
            raise ValueError(f"margin must be > 0, got {self.margin}")
        if self.max_tn < 1:
            raise ValueError(f"max_tn must be >= 1, got {self.max_tn}")
        if self.regression_sign not in ("paper", "penalty"):
            raise ValueError(f"regression_sign must be 'paper' or 'penalty', got {self.regression_sign!r}")

    def replace(self, **kwargs) -> "ControlConfig":
        return replace(self, **kwargs)

    def to_json(self) -> dict:
        doc = {}
        for f in fields(self):
            key = "lambda" if f.name == "lambda_" else f.name
            doc[key] = getattr(self, f.name)
        return doc

    @classmethod
    def from_json(cls, raw: dict) -> "ControlConfig":
        known = {f.name for f in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            name = "lambda_" if key == "lambda" else key
            if name in known:
                kwargs[name] = value
        return cls(**kwargs)
