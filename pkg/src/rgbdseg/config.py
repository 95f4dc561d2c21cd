"""Pipeline configuration and the plain `key = value` config-file format.

Precedence, lowest to highest: built-in defaults, the RGBD_BGSEG_WORKERS
environment variable (workers only), a config file, explicit flag values.
Algorithm parameters use dotted keys (`gmm.tau = 4.0`, `pbas.n = 20`); the
top-level keys mirror the CLI flag names with underscores.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .gmm import GmmParams
from .pbas import PbasParams

ALGORITHMS = ("gmm", "pbas")
MODES = ("rgb_only", "rgbd")
WORKERS_ENV = "RGBD_BGSEG_WORKERS"


@dataclass
class PipelineConfig:
    algorithm: str = "gmm"
    mode: str = "rgbd"
    gmm: GmmParams = field(default_factory=GmmParams)
    pbas: PbasParams = field(default_factory=PbasParams)
    seed: int = 0
    workers: int = 1
    emit_masks: bool = False
    out_dir: Optional[Path] = None

    def validate(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must fit in 64 bits")
        try:
            self.gmm.validate()
            self.pbas.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return value


def parse_config_file(path) -> dict:
    """Parse a `key = value` file into a flat string mapping.

    Blank lines and lines starting with # are skipped; keys may be dotted
    for algorithm parameters.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    mapping: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        mapping[key.strip()] = value.strip()
    return mapping


def _coerce(value: str, target_type):
    if target_type is bool:
        lowered = value.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    return target_type(value)


def apply_param_overrides(config: PipelineConfig, overrides: dict) -> None:
    """Apply dotted-key overrides (`gmm.tau`, `pbas.n`, ...) in place."""
    for key, raw in overrides.items():
        group, _, name = key.partition(".")
        if group not in ("gmm", "pbas") or not name:
            raise ConfigError(f"unknown parameter key {key!r} (expected gmm.* or pbas.*)")
        params = getattr(config, group)
        fields = {f.name: f for f in dataclasses.fields(params)}
        if name not in fields:
            raise ConfigError(f"unknown {group} parameter {name!r}")
        target_type = type(getattr(params, name))
        try:
            setattr(params, name, _coerce(str(raw), target_type))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def effective_config_lines(config: PipelineConfig, extra: Optional[dict] = None) -> list:
    """The run's effective settings as `key = value` lines (echoed at start)."""
    lines = [
        f"algo = {config.algorithm}",
        f"mode = {config.mode}",
        f"seed = {config.seed}",
        f"workers = {config.workers}",
    ]
    for group in ("gmm", "pbas"):
        params = getattr(config, group)
        for f in dataclasses.fields(params):
            lines.append(f"{group}.{f.name} = {getattr(params, f.name)}")
    if extra:
        lines.extend(f"{k} = {v}" for k, v in sorted(extra.items()))
    return lines
