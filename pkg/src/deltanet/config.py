"""Run configuration: flat key=value files, CLI overrides, provenance hash.

The config file format is one ``key = value`` per line with ``#`` comments.
Unknown keys are rejected. The resolved configuration (file values plus CLI
overrides plus defaults) is canonicalized to text and hashed; that hash is
embedded in every artifact so mismatched pipeline stages fail loudly.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .corpus import DEFAULT_DELTA_MARKERS, DeltaRules
from .errors import ConfigError

_VARIANT_ALIASES = {
    "main": "main",
    "unweighted": "unweighted",
    "exclude-winning": "exclude_winning_replies",
    "exclude_winning": "exclude_winning_replies",
    "exclude_winning_replies": "exclude_winning_replies",
}

_FEATURE_SETS = ("", "language", "network", "all")
_NETWORK_MODES = ("degree_ratio", "all")
_MODEL_FAMILIES = (
    "decision_tree",
    "random_forest",
    "adaboost",
    "logistic_regression",
    "gaussian_nb",
)
_DELTA_MODES = ("random", "degree_ratio")


@dataclass(frozen=True)
class RunConfig:
    input: str = ""
    output_dir: str = "out"
    lexicon_dir: str = ""
    seed: int = 0
    threads: int = 0  # 0 means all available cores
    delta_markers: tuple[str, ...] = DEFAULT_DELTA_MARKERS
    strip_quoted: bool = True
    validate_posts: bool = False
    variant: str = "main"
    feature_set: str = ""  # empty runs language, network and all
    network_features: str = "degree_ratio"
    models: tuple[str, ...] = _MODEL_FAMILIES
    cv_folds: int = 5
    importance_repeats: int = 10
    importance_feature_set: str = "network"
    holdout_fraction: float = 0.25
    clustered_se: bool = False
    synth_discussions: int = 20
    synth_comments: int = 30
    synth_strength: float = 1.0
    synth_delta_probability: float = 0.85
    synth_delta_mode: str = "random"
    synth_second_delta_probability: float = 0.25
    synth_op_overlap: float = 0.35

    def delta_rules(self) -> DeltaRules:
        return DeltaRules(markers=self.delta_markers, strip_quoted_lines=self.strip_quoted)

    def effective_threads(self) -> int:
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def as_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name in _NON_PROVENANCE_KEYS:
                continue
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _parse_value(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "bool":
        lowered = raw.lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ConfigError(f"config key {key!r}: expected a boolean, got {raw!r}")
    if kind == "int":
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected an integer, got {raw!r}") from exc
    if kind == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: expected a number, got {raw!r}") from exc
    if kind.startswith("tuple"):
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    return raw


def parse_config_file(path: str | Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values: dict = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def validate_config(cfg: RunConfig) -> RunConfig:
    if cfg.variant not in _VARIANT_ALIASES:
        raise ConfigError(
            f"unknown variant {cfg.variant!r}; expected one of {sorted(set(_VARIANT_ALIASES))}"
        )
    cfg = replace(cfg, variant=_VARIANT_ALIASES[cfg.variant])
    if cfg.feature_set not in _FEATURE_SETS:
        raise ConfigError(f"unknown feature_set {cfg.feature_set!r}")
    if cfg.network_features not in _NETWORK_MODES:
        raise ConfigError(f"unknown network_features {cfg.network_features!r}")
    if cfg.importance_feature_set not in ("language", "network", "all"):
        raise ConfigError(f"unknown importance_feature_set {cfg.importance_feature_set!r}")
    bad_models = [m for m in cfg.models if m not in _MODEL_FAMILIES]
    if bad_models:
        raise ConfigError(f"unknown model families {bad_models}")
    if not cfg.models:
        raise ConfigError("models must not be empty")
    if cfg.synth_delta_mode not in _DELTA_MODES:
        raise ConfigError(f"unknown synth_delta_mode {cfg.synth_delta_mode!r}")
    if cfg.cv_folds < 2:
        raise ConfigError("cv_folds must be at least 2")
    if not 0.0 < cfg.holdout_fraction < 1.0:
        raise ConfigError("holdout_fraction must be in (0, 1)")
    if cfg.threads < 0:
        raise ConfigError("threads must be >= 0")
    if not cfg.delta_markers:
        raise ConfigError("delta_markers must not be empty")
    return cfg


def build_config(config_path: str | None = None, **overrides) -> RunConfig:
    """Defaults, then config-file values, then non-None CLI overrides."""
    values: dict = {}
    if config_path:
        values.update(parse_config_file(config_path))
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELD_TYPES:
            raise ConfigError(f"unknown config override {key!r}")
        values[key] = value
    return validate_config(RunConfig(**values))


# Execution knobs that cannot change results stay out of the provenance
# hash, so runs with different thread counts remain byte-identical.
_NON_PROVENANCE_KEYS = ("threads",)


def resolved_config_text(cfg: RunConfig) -> str:
    lines = []
    for f in sorted(fields(cfg), key=lambda f: f.name):
        if f.name in _NON_PROVENANCE_KEYS:
            continue
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            rendered = ",".join(value)
        else:
            rendered = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{f.name} = {rendered}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(resolved_config_text(cfg).encode("utf-8")).hexdigest()[:12]
