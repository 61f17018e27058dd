"""Building typed configs from flat key = value mappings.

Pipeline keys use the PipelineConfig field names; tracker keys carry an
``ms_`` prefix. Unknown keys are rejected. Precedence is handled by the
caller: defaults, then file values, then explicit overrides.
"""

from __future__ import annotations

import dataclasses
from typing import Any

from .errors import ConfigError
from .meanshift import MsConfig
from .pipeline import PipelineConfig

PIPELINE_KEYS = {f.name: f for f in dataclasses.fields(PipelineConfig)}
MS_KEYS = {"ms_" + f.name: f for f in dataclasses.fields(MsConfig)}


def check_known_keys(mapping: dict[str, str]) -> None:
    unknown = sorted(set(mapping) - set(PIPELINE_KEYS) - set(MS_KEYS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")


def _coerce(name: str, text: str, target_type) -> Any:
    try:
        if target_type is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if target_type is int:
            return int(text)
        return float(text)
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {text!r}") from None


def _field_type(field: dataclasses.Field):
    mapping = {
        "int": int,
        "float": float,
        "bool": bool,
        "float | None": float,
        "int | None": int,
    }
    ann = field.type if isinstance(field.type, str) else field.type.__name__
    if ann not in mapping:
        raise ConfigError(f"unsupported config field type {ann!r}")
    return mapping[ann]


def make_pipeline_config(mapping: dict[str, str], **overrides) -> PipelineConfig:
    """PipelineConfig from file values plus explicit keyword overrides."""
    check_known_keys(mapping)
    values: dict[str, Any] = {}
    for key, text in mapping.items():
        if key in PIPELINE_KEYS:
            values[key] = _coerce(key, text, _field_type(PIPELINE_KEYS[key]))
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in PIPELINE_KEYS:
            raise ConfigError(f"unknown pipeline option {key!r}")
        values[key] = value
    config = PipelineConfig(**values)
    config.validate()
    return config


def make_ms_config(mapping: dict[str, str], **overrides) -> MsConfig:
    """MsConfig from the ms_-prefixed file keys plus keyword overrides."""
    check_known_keys(mapping)
    values: dict[str, Any] = {}
    for key, text in mapping.items():
        if key in MS_KEYS:
            values[key[3:]] = _coerce(key, text, _field_type(MS_KEYS[key]))
    for key, value in overrides.items():
        if value is None:
            continue
        if "ms_" + key not in MS_KEYS:
            raise ConfigError(f"unknown tracker option {key!r}")
        values[key] = value
    return MsConfig(**values)
