"""Training configuration: defaults, flat key=value files, validation."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any

import numpy as np

from .errors import ConfigError
from .model import Variant

# Optimizer choices: 'rsgd' converts gradients with the inverse metric
# tensor before the retraction; 'sgd' takes the raw Euclidean step. The
# euclidean and tangent variants always use plain SGD semantics.
OPTIMIZERS = ("rsgd", "sgd")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_optional_float(raw: str):
    low = raw.strip().lower()
    if low in ("none", ""):
        return None
    return float(raw)


@dataclass
class TrainConfig:
    """Every knob of a training run; defaults follow the library's benchmarks."""

    input_path: str = ""
    output_dir: str = ""
    variant: str = Variant.HYPERBOLIC.value
    curvature: float = 1.0
    dim: int = 64
    margin: float = 0.5
    gamma: float = 0.75
    learning_rate: float = 0.01
    beta: float = 0.01
    batch_size: int = 512
    epochs: int = 500
    eval_every: int = 50
    k: int = 10
    n_negatives: int = 100
    seed: int = 42
    min_interactions: int = 3
    k_core: int = 0
    optimizer: str = "rsgd"
    grad_clip: float | None = None
    dropout: float = 0.0
    generalized_rescale: bool = False
    delimiter: str = "\t"
    header: bool = False

    def validate(self) -> "TrainConfig":
        Variant.coerce(self.variant)
        checks = [
            ("curvature", np.isfinite(self.curvature) and self.curvature >= 0),
            ("dim", self.dim > 0),
            ("margin", np.isfinite(self.margin) and self.margin > 0),
            ("gamma", np.isfinite(self.gamma) and self.gamma >= 0),
            ("learning_rate", np.isfinite(self.learning_rate) and self.learning_rate > 0),
            ("beta", np.isfinite(self.beta) and self.beta > 0),
            ("batch_size", self.batch_size > 0),
            ("epochs", self.epochs > 0),
            ("eval_every", self.eval_every > 0),
            ("k", self.k > 0),
            ("n_negatives", self.n_negatives > 0),
            ("seed", self.seed >= 0),
            ("min_interactions", self.min_interactions >= 0),
            ("k_core", self.k_core >= 0),
            ("dropout", 0.0 <= self.dropout < 1.0),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"{name}: invalid value {getattr(self, name)!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer: expected one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.grad_clip is not None and not (np.isfinite(self.grad_clip) and self.grad_clip > 0):
            raise ConfigError(f"grad_clip: must be a positive real or none, got {self.grad_clip!r}")
        if Variant.coerce(self.variant) is not Variant.EUCLIDEAN and self.curvature <= 0:
            raise ConfigError("curvature: hyperbolic and tangent variants require curvature > 0")
        return self

    def replace(self, **overrides) -> "TrainConfig":
        data = self.to_dict()
        data.update(overrides)
        return TrainConfig(**data)

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_PARSERS = {
    "input_path": str,
    "output_dir": str,
    "variant": str,
    "curvature": float,
    "dim": int,
    "margin": float,
    "gamma": float,
    "learning_rate": float,
    "beta": float,
    "batch_size": int,
    "epochs": int,
    "eval_every": int,
    "k": int,
    "n_negatives": int,
    "seed": int,
    "min_interactions": int,
    "k_core": int,
    "optimizer": str,
    "grad_clip": _parse_optional_float,
    "dropout": float,
    "generalized_rescale": _parse_bool,
    "delimiter": str,
    "header": _parse_bool,
}


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse flat `key = value` text; '#' starts a comment line."""
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        raw_value = raw_value.strip()
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](raw_value)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: {key}: {exc}") from None
    return values


def load_config(path: str, overrides: dict[str, Any] | None = None) -> TrainConfig:
    """Config file values under CLI overrides, on top of the defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        values = parse_config_text(fh.read())
    if overrides:
        values.update(overrides)
    return TrainConfig(**values).validate()
