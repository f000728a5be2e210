"""Flat key=value run configuration with typed validation."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

PIPELINES = ("groupcl", "groupig", "graphcl-baseline")
ESTIMATORS = ("nonparam", "param")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    """Every hyperparameter and seed governing a training/evaluation run."""

    pipeline: str = "groupcl"
    num_groups: int = 4
    embed_dim: int = 160
    key_dim: int = 100
    gin_layers: int = 3
    gin_hidden: int = 32
    diversity_weight: float = 0.5
    estimator: str = "nonparam"
    aug_kinds: str = "node-drop,attribute-mask"
    aug_ratio: float = 0.2
    learning_rate: float = 0.001
    epochs: int = 20
    batch_size: int = 128
    seed: int = 0
    tie_views: bool = True
    scale_scores: bool = False
    learnable_eps: bool = False

    def __post_init__(self):
        if self.pipeline not in PIPELINES:
            raise ConfigError(f"pipeline must be one of {PIPELINES}, got {self.pipeline!r}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.num_groups < 1:
            raise ConfigError("num_groups must be at least 1")
        if self.embed_dim % self.num_groups != 0:
            raise ConfigError(
                f"embed_dim {self.embed_dim} not divisible by num_groups {self.num_groups}")
        if self.diversity_weight < 0:
            raise ConfigError("diversity_weight must be non-negative")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.gin_layers < 0:
            raise ConfigError("epochs/batch_size/gin_layers out of range")

    @property
    def group_dim(self) -> int:
        return self.embed_dim // self.num_groups

    @property
    def aug_kind_list(self) -> tuple[str, ...]:
        return tuple(k.strip() for k in self.aug_kinds.split(",") if k.strip())


@dataclass
class DataConfig:
    """Parameters of the synthetic planted-motif generator."""

    seed: int = 7
    num_graphs: int = 200
    nodes_per_graph: int = 14
    feature_dim: int = 8


def _convert(name: str, raw: str, kind):
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes"):
                return True
            if low in ("false", "0", "no"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"invalid value for {name!r}: {exc}") from exc


def parse_pairs(pairs: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in pairs:
        if "=" not in item:
            raise ConfigError(f"expected key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"empty key in {item!r}")
        if key in out:
            raise ConfigError(f"duplicate key {key!r}")
        out[key] = value.strip()
    return out


def read_config_file(path) -> dict[str, str]:
    pairs = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}: line {lineno}: expected key=value")
            pairs.append(line)
    return parse_pairs(pairs)


def build_config(cls, entries: dict[str, str]):
    """Instantiate a config dataclass from string entries; unknown keys are
    rejected, never ignored."""
    fields = {f.name: f.type for f in dataclasses.fields(cls)}
    types = {"int": int, "float": float, "str": str, "bool": bool}
    unknown = set(entries) - set(fields)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for name, raw in entries.items():
        kind = fields[name]
        if isinstance(kind, str):
            kind = types[kind]
        kwargs[name] = _convert(name, raw, kind)
    return cls(**kwargs)


def load_config(cls, path=None, overrides: list[str] | None = None):
    entries = read_config_file(path) if path else {}
    entries.update(parse_pairs(overrides or []))
    return build_config(cls, entries)


def format_config(cfg) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{f.name}={value}")
    return "\n".join(lines) + "\n"
