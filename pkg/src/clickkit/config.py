"""Pipeline configuration: a YAML (or JSON) tree validated into dataclasses."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from pathlib import Path

import yaml

from .errors import ConfigError
from .fod import FodConfig


@dataclass(frozen=True)
class DetectionSection:
    confidence_floor: float = 0.30


@dataclass(frozen=True)
class ClassifierSection:
    model_path: str | None = None
    context_size: int = 5
    n_trees: int = 10
    bands: bool = False


@dataclass(frozen=True)
class EvalSection:
    partial_frac: float = 0.20
    full_frac: float = 0.90
    bin_seconds: float = 1.0


@dataclass(frozen=True)
class PipelineConfig:
    sample_rate: int = 192_000
    window_length: int = 960
    fod: FodConfig = field(default_factory=FodConfig)
    detection: DetectionSection = field(default_factory=DetectionSection)
    classifier: ClassifierSection = field(default_factory=ClassifierSection)
    eval: EvalSection = field(default_factory=EvalSection)
    seed: int = 0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError("sample_rate must be positive")
        if self.window_length < 2:
            raise ConfigError("window_length must be >= 2")
        if not 0.0 <= self.detection.confidence_floor <= 1.0:
            raise ConfigError("detection.confidence_floor must be in [0, 1]")
        if self.classifier.context_size not in (3, 5, 9):
            raise ConfigError("classifier.context_size must be 3, 5 or 9")
        if self.classifier.n_trees < 1:
            raise ConfigError("classifier.n_trees must be >= 1")
        e = self.eval
        if not 0.0 < e.partial_frac <= e.full_frac <= 1.0:
            raise ConfigError("need 0 < eval.partial_frac <= eval.full_frac <= 1")
        if e.bin_seconds <= 0:
            raise ConfigError("eval.bin_seconds must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        path = f"{where}.{name}" if where else name
        if is_dataclass(current):
            kwargs[name] = _build(type(current), value, path)
        else:
            kwargs[name] = _coerce(current, value, path, name == "model_path")
    return cls(**kwargs)


def _coerce(default, value, path: str, nullable: bool):
    if value is None:
        if nullable:
            return None
        raise ConfigError(f"{path} may not be null")
    if nullable:
        if not isinstance(value, str):
            raise ConfigError(f"{path} must be a string or null")
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be a boolean")
        return value
    if isinstance(default, int) and not isinstance(value, bool):
        if isinstance(value, int):
            return value
        raise ConfigError(f"{path} must be an integer")
    if isinstance(default, float):
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        raise ConfigError(f"{path} must be a number")
    if isinstance(value, str):
        return value
    raise ConfigError(f"{path} must be a string")


def config_from_dict(data: dict | None) -> PipelineConfig:
    try:
        return _build(PipelineConfig, data or {}, "")
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> PipelineConfig:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return config_from_dict(data)


def override(config: PipelineConfig, **sections) -> PipelineConfig:
    """Replace fields; ``fod={"pad": 48}``-style dicts update one section.

    ``None`` values are ignored so unset CLI flags leave the config alone.
    """
    top = {}
    for key, value in sections.items():
        if value is None:
            continue
        current = getattr(config, key)
        if is_dataclass(current) and isinstance(value, dict):
            changes = {k: v for k, v in value.items() if v is not None}
            if changes:
                top[key] = replace(current, **changes)
        else:
            top[key] = value
    return replace(config, **top) if top else config
