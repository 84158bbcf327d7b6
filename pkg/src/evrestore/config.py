"""Plain-text key = value configuration files.

One flat namespace covers scene generation, simulator, network and training
settings; each dataclass picks the keys it knows. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .dataset import SceneSpec
from .errors import ValidationError
from .model import NetworkConfig
from .simulator import SimulatorConfig
from .train import TrainConfig

# dataset sizing keys handled outside the dataclasses
_EXTRA_KEYS = {"train_samples": 4, "test_samples": 2}

_CONFIG_CLASSES = (SceneSpec, SimulatorConfig, NetworkConfig, TrainConfig)


def _known_keys() -> set:
    keys = set(_EXTRA_KEYS)
    for cls in _CONFIG_CLASSES:
        keys.update(f.name for f in dataclasses.fields(cls))
    return keys


def load_config(path) -> dict:
    """Read a key = value file ('#' comments, blank lines allowed)."""
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    known = _known_keys()
    cfg = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
        cfg[key] = value
    return cfg


def _coerce(value: str, target_type):
    if target_type is bool:
        low = value.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if target_type is int:
        return int(value)
    if target_type is float:
        return float(value)
    if target_type is tuple:
        return tuple(int(v) for v in value.split(","))
    return value


def build(cls, cfg: dict, **overrides):
    """Instantiate a config dataclass from the flat mapping plus overrides."""
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name in overrides:
            kwargs[f.name] = overrides[f.name]
        elif f.name in cfg:
            base = f.type if isinstance(f.type, type) else None
            default = f.default if f.default is not dataclasses.MISSING else None
            target = base or (type(default) if default is not None else str)
            # optional ints (e.g. max_steps) arrive as plain int strings
            if target is type(None):
                target = int
            try:
                kwargs[f.name] = _coerce(cfg[f.name], target)
            except ValueError as exc:
                raise ValidationError(f"config key {f.name!r}: {exc}") from exc
    return cls(**kwargs)


def sample_counts(cfg: dict) -> tuple[int, int]:
    try:
        train_n = int(cfg.get("train_samples", _EXTRA_KEYS["train_samples"]))
        test_n = int(cfg.get("test_samples", _EXTRA_KEYS["test_samples"]))
    except ValueError as exc:
        raise ValidationError(f"invalid sample count: {exc}") from exc
    return train_n, test_n
