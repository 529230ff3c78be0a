"""Pipeline configuration: a TOML file plus environment overrides.

Every stage of the command-line pipeline reads one config file. Paths
are resolved relative to the file's own directory, so a fixture tree
can be moved or copied wholesale. Any key can be overridden through the
environment as ``SYMPKIT_<SECTION>_<KEY>`` (for example
``SYMPKIT_RELEVANCE_MODE=loss_mask``); override values are parsed as
JSON when possible and taken as plain strings otherwise. Unknown
sections, keys, or override names are rejected rather than ignored.
"""

from __future__ import annotations

import json
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .classifier import MODES, TrainConfig
from .errors import SchemaError
from .mdd import VARIANTS

ENV_PREFIX = "SYMPKIT_"


@dataclass(frozen=True)
class PathsConfig:
    """Input locations; ``out`` is where stages write their artifacts."""

    kg: Path = Path("kg.json")
    posts: Path = Path("posts.ndjson")
    lexicons: Path = Path("lexicons")
    annotations: Path = Path("annotations.tsv")
    users: Path = Path("users.ndjson")
    diagnosis_rule: Path = Path("diagnosis_rule.json")
    out: Path = Path("out")


@dataclass(frozen=True)
class RetrievalConfig:
    embedding_dim: int = 256
    embedding_seed: int = 7
    capacity: int = 300
    bands: int = 32
    rows: int = 4
    num_hashes: int = 128
    shingle_size: int = 3
    dedup_threshold: float = 0.8
    dedup_seed: int = 11

    def __post_init__(self) -> None:
        if self.embedding_dim < 8:
            raise SchemaError("embedding_dim must be at least 8")
        if self.capacity < 1:
            raise SchemaError("capacity must be positive")
        if self.bands * self.rows != self.num_hashes:
            raise SchemaError(
                f"bands * rows must equal num_hashes "
                f"({self.bands} * {self.rows} != {self.num_hashes})"
            )
        if not 0.0 < self.dedup_threshold <= 1.0:
            raise SchemaError("dedup_threshold must lie in (0, 1]")


@dataclass(frozen=True)
class SplitsConfig:
    ratios: tuple[int, ...] = (5, 1, 4)
    seed: int = 13

    def __post_init__(self) -> None:
        if len(self.ratios) != 3 or any(r <= 0 for r in self.ratios):
            raise SchemaError("splits.ratios must be three positive integers")


@dataclass(frozen=True)
class RelevanceConfig:
    mode: str = "loss_mask"
    target_tnr: float = 0.9
    learning_rate: float = 0.5
    epochs: int = 40
    batch_size: int = 64
    patience: int = 4
    seed: int = 17
    min_df: int = 1

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise SchemaError(f"relevance.mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 < self.target_tnr <= 1.0:
            raise SchemaError("relevance.target_tnr must lie in (0, 1]")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            patience=self.patience,
            seed=self.seed,
        )


@dataclass(frozen=True)
class StatusConfig:
    learning_rate: float = 0.5
    epochs: int = 40
    batch_size: int = 64
    patience: int = 4
    seed: int = 19

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            patience=self.patience,
            seed=self.seed,
        )


@dataclass(frozen=True)
class MddConfig:
    variant: str = "conv"
    kernel_sizes: tuple[int, ...] = (3, 5, 7)
    channels: int = 16
    learning_rate: float = 0.05
    epochs: int = 60
    batch_size: int = 16
    patience: int = 4
    seed: int = 23

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise SchemaError(f"mdd.variant must be one of {VARIANTS}, got {self.variant!r}")
        if not self.kernel_sizes or any(k < 1 for k in self.kernel_sizes):
            raise SchemaError("mdd.kernel_sizes must be positive integers")

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            patience=self.patience,
            seed=self.seed,
        )


@dataclass(frozen=True)
class ControlsConfig:
    """Sampling rule for users with no mental-health activity."""

    exclude_subreddits: tuple[str, ...] = ()
    exclude_terms: tuple[str, ...] = ()
    n_users: int = 0
    seed: int = 29


@dataclass(frozen=True)
class AuditConfig:
    fp_coverage_max: float = 0.2
    fn_coverage_min: float = 0.6

    def __post_init__(self) -> None:
        for name, value in (
            ("fp_coverage_max", self.fp_coverage_max),
            ("fn_coverage_min", self.fn_coverage_min),
        ):
            if not 0.0 <= value <= 1.0:
                raise SchemaError(f"audit.{name} must lie in [0, 1]")


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = PathsConfig()
    retrieval: RetrievalConfig = RetrievalConfig()
    splits: SplitsConfig = SplitsConfig()
    relevance: RelevanceConfig = RelevanceConfig()
    status: StatusConfig = StatusConfig()
    mdd: MddConfig = MddConfig()
    controls: ControlsConfig = ControlsConfig()
    audit: AuditConfig = AuditConfig()


_SECTIONS: dict[str, type] = {
    "paths": PathsConfig,
    "retrieval": RetrievalConfig,
    "splits": SplitsConfig,
    "relevance": RelevanceConfig,
    "status": StatusConfig,
    "mdd": MddConfig,
    "controls": ControlsConfig,
    "audit": AuditConfig,
}


def _coerce(section: str, key: str, declared: str, value: object) -> object:
    where = f"{section}.{key}"
    if declared == "Path":
        if not isinstance(value, str) or not value:
            raise SchemaError(f"{where} must be a non-empty path string")
        return Path(value)
    if declared == "str":
        if not isinstance(value, str):
            raise SchemaError(f"{where} must be a string")
        return value
    if declared == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise SchemaError(f"{where} must be an integer")
        return value
    if declared == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise SchemaError(f"{where} must be a number")
        return float(value)
    if declared == "tuple[int, ...]":
        if not isinstance(value, (list, tuple)) or any(
            isinstance(v, bool) or not isinstance(v, int) for v in value
        ):
            raise SchemaError(f"{where} must be a list of integers")
        return tuple(value)
    if declared == "tuple[str, ...]":
        if not isinstance(value, (list, tuple)) or any(not isinstance(v, str) for v in value):
            raise SchemaError(f"{where} must be a list of strings")
        return tuple(value)
    raise SchemaError(f"{where} has unsupported declared type {declared!r}")


def _build_section(name: str, data: Mapping[str, object]) -> object:
    cls = _SECTIONS[name]
    declared = {f.name: f.type for f in fields(cls)}
    unknown = sorted(set(data) - set(declared))
    if unknown:
        raise SchemaError(f"unknown key(s) {unknown} in config section [{name}]")
    kwargs = {
        key: _coerce(name, key, declared[key], value) for key, value in data.items()
    }
    return cls(**kwargs)


def _env_overrides(env: Mapping[str, str]) -> dict[str, dict[str, object]]:
    overrides: dict[str, dict[str, object]] = {}
    for name in sorted(env):
        if not name.startswith(ENV_PREFIX):
            continue
        rest = name[len(ENV_PREFIX):]
        section, _, key = rest.partition("_")
        section = section.lower()
        key = key.lower()
        if section not in _SECTIONS or not key:
            raise SchemaError(f"environment override {name} names no known config key")
        raw = env[name]
        try:
            value: object = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        overrides.setdefault(section, {})[key] = value
    return overrides


def load_config(
    path: str | Path, env: Mapping[str, str] | None = None
) -> PipelineConfig:
    """Parse, override, validate, and path-resolve one config file."""
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from exc
    unknown = sorted(set(raw) - set(_SECTIONS))
    if unknown:
        raise SchemaError(f"unknown config section(s) {unknown} in {path}")
    for section, data in raw.items():
        if not isinstance(data, dict):
            raise SchemaError(f"config section [{section}] must be a table")

    merged: dict[str, dict[str, object]] = {name: dict(raw.get(name, {})) for name in _SECTIONS}
    for section, data in _env_overrides(os.environ if env is None else env).items():
        merged[section].update(data)

    sections = {name: _build_section(name, data) for name, data in merged.items()}
    config = PipelineConfig(**sections)  # type: ignore[arg-type]

    base = path.resolve().parent
    resolved = {
        f.name: base / getattr(config.paths, f.name)
        if not getattr(config.paths, f.name).is_absolute()
        else getattr(config.paths, f.name)
        for f in fields(PathsConfig)
    }
    return PipelineConfig(
        paths=PathsConfig(**resolved),
        retrieval=config.retrieval,
        splits=config.splits,
        relevance=config.relevance,
        status=config.status,
        mdd=config.mdd,
        controls=config.controls,
        audit=config.audit,
    )
