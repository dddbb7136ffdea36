"""Flat ``key=value`` configuration files with namespaced keys.

Example::

    # solver
    solver.gamma = 0.05
    kernel.kernel_size = 21
    pyramid.factor = 0.8
    pipeline.mode = nonDF
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Dict, Mapping

from .pipeline import PipelineConfig


class ConfigError(ValueError):
    pass


# top-level PipelineConfig fields reachable through a namespaced key
_TOP_LEVEL = {
    "pipeline.mode": "mode",
    "pipeline.impulse_threshold": "impulse_threshold",
    "pyramid.factor": "pyramid_factor",
    "pyramid.min_side": "min_side",
}
_SECTIONS = ("solver", "kernel", "filter", "ransac")


def parse_config_text(text: str, source: str = "<config>") -> Dict[str, str]:
    entries: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        entries[key] = value
    return entries


def _convert(raw: str, current, key: str):
    if isinstance(current, bool):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    return raw


def apply_overrides(cfg: PipelineConfig, entries: Mapping[str, str]) -> PipelineConfig:
    """Return a copy of ``cfg`` with namespaced string overrides applied."""
    top: Dict[str, object] = {}
    nested: Dict[str, Dict[str, object]] = {s: {} for s in _SECTIONS}
    for key, raw in entries.items():
        if key in _TOP_LEVEL:
            name = _TOP_LEVEL[key]
            top[name] = _convert(raw, getattr(cfg, name), key)
            continue
        section, _, name = key.partition(".")
        if section not in nested or not name:
            raise ConfigError(f"unknown config key {key!r}")
        params = getattr(cfg, section)
        valid = {f.name for f in dataclasses.fields(params)}
        if name not in valid:
            raise ConfigError(f"unknown config key {key!r}")
        nested[section][name] = _convert(raw, getattr(params, name), key)
    try:
        for section, values in nested.items():
            if values:
                top[section] = dataclasses.replace(getattr(cfg, section), **values)
        return dataclasses.replace(cfg, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, base: PipelineConfig = None) -> PipelineConfig:
    entries = parse_config_text(Path(path).read_text(encoding="utf-8"), str(path))
    return apply_overrides(base or PipelineConfig(), entries)
