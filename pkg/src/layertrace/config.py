"""TOML configuration mirroring :class:`PipelineConfig` field names.

Either nested tables or flat keys are accepted::

    dedup_mse = 1e-5
    line_mode = "auto"

    [trace]
    max_fit_error = 0.3

    [diff]
    diff_threshold = 12

A flat key such as ``max_fit_error = 0.3`` is routed to the table that owns
the field.
"""

from __future__ import annotations

import sys
from dataclasses import fields, replace
from pathlib import Path

from .assembler import PipelineConfig
from .errors import ConfigError, StorageError
from .imgproc import DiffConfig
from .tracer import TraceConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_SUB = {"diff": DiffConfig, "trace": TraceConfig}
_TOP = {f.name for f in fields(PipelineConfig)} - set(_SUB)
_OWNER = {f.name: sec for sec, cls in _SUB.items() for f in fields(cls)}


def _coerce(cls, values: dict, where: str):
    types = {f.name: f.type for f in fields(cls)}
    out = {}
    for k, v in values.items():
        if k not in types:
            raise ConfigError(f"unknown key {where}{k}")
        if isinstance(v, bool) or not isinstance(v, (int, float, str)):
            raise ConfigError(f"bad value for {where}{k}: {v!r}")
        out[k] = v
    return out


def config_from_mapping(data: dict, base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = base or PipelineConfig()
    top, sub = {}, {s: {} for s in _SUB}
    for k, v in data.items():
        if k in _SUB:
            if not isinstance(v, dict):
                raise ConfigError(f"[{k}] must be a table")
            sub[k].update(_coerce(_SUB[k], v, f"{k}."))
        elif k in _TOP:
            top[k] = v
        elif k in _OWNER:
            sub[_OWNER[k]].update(_coerce(_SUB[_OWNER[k]], {k: v}, ""))
        else:
            raise ConfigError(f"unknown key {k}")
    try:
        parts = {s: replace(getattr(cfg, s), **vals) for s, vals in sub.items() if vals}
        return replace(cfg, **top, **parts)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e)) from e


def load_config(path, base: PipelineConfig | None = None) -> PipelineConfig:
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise StorageError(f"cannot read config {path}: {e}") from e
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"{path}: {e}") from e
    return config_from_mapping(data, base)
