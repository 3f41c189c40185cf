"""Layered pipeline configuration: defaults < YAML file < environment < CLI flags."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .corpus import DEFAULT_DOMAINS
from .curation import CurationConfig
from .jsonio import canonical_hash
from .orchestrator import LoopConfig

ENV_PREFIX = "DSD_"


class ConfigError(ValueError):
    """Invalid configuration; ``field_path`` names the offending key."""

    def __init__(self, field_path: str, message: str):
        super().__init__(f"{field_path}: {message}")
        self.field_path = field_path


@dataclass(frozen=True)
class PathsConfig:
    corpus: str | None = None
    corpus_format: str = "jsonl"
    output_dir: str = "out"
    cache_dir: str = "cache"
    search_fixture: str | None = None


@dataclass(frozen=True)
class GatewayConfig:
    chat_endpoint: str | None = None
    chat_api_key_env: str = "DSD_CHAT_API_KEY"
    reasoner_model: str | None = None
    summarizer_model: str | None = None
    annotator_model: str | None = None
    judge_model: str | None = None
    search_endpoint: str | None = None
    search_api_key_env: str = "DSD_SEARCH_API_KEY"
    search_provider: str = "http"
    fetch_pages: bool = False
    retries: int = 3
    backoff_seconds: float = 1.0


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    curation: CurationConfig = field(default_factory=CurationConfig)
    gateway: GatewayConfig = field(default_factory=GatewayConfig)
    label_set: tuple[str, ...] = DEFAULT_DOMAINS
    sample_size: int = 100
    concurrency: int = 8

    def to_dict(self) -> dict[str, Any]:
        return _to_plain(dataclasses.asdict(self))

    def digest(self) -> str:
        """Hash of everything except filesystem locations."""
        d = self.to_dict()
        d.pop("paths")
        return canonical_hash(d)

    def with_overrides(self, overrides: Mapping[str, Any]) -> "PipelineConfig":
        data = self.to_dict()
        for dotted, value in overrides.items():
            _set_dotted(data, dotted, value)
        return build_config(data)


def _to_plain(obj):
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    return obj


def _set_dotted(data: dict, dotted: str, value: Any) -> None:
    keys = dotted.split(".")
    node = data
    for i, key in enumerate(keys[:-1]):
        if not isinstance(node.get(key), dict):
            raise ConfigError(".".join(keys[: i + 1]), "not a config section")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(dotted, "unknown setting")
    node[keys[-1]] = value


def _coerce(value: Any, typ, path: str):
    # annotations are strings here (postponed evaluation)
    typ_s = str(typ)
    if value is None:
        if "None" in typ_s:
            return None
        raise ConfigError(path, "must not be null")
    if typ_s.startswith("tuple") or typ_s.startswith("tuple["):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(path, "expected a list")
        return tuple(value)
    if typ_s.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true/false")
        return value
    if typ_s.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, "expected an integer")
        return value
    if typ_s.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, "expected a number")
        return float(value)
    if typ_s.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(path, "expected a string")
        return value
    return value


def _build(cls, data: Mapping[str, Any] | None, prefix: str):
    data = dict(data or {})
    kwargs = {}
    for f in dataclasses.fields(cls):
        path = f"{prefix}{f.name}"
        if f.name not in data:
            continue
        value = data.pop(f.name)
        sub = _SECTIONS.get(f.name) if cls is PipelineConfig else None
        if sub is not None:
            if not isinstance(value, Mapping):
                raise ConfigError(path, "expected a mapping")
            kwargs[f.name] = _build(sub, value, path + ".")
        else:
            kwargs[f.name] = _coerce(value, f.type, path)
    if data:
        raise ConfigError(prefix + sorted(data)[0], "unknown setting")
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(prefix.rstrip(".") or "config", str(exc)) from exc


_SECTIONS = {"paths": PathsConfig, "loop": LoopConfig, "curation": CurationConfig, "gateway": GatewayConfig}


def build_config(data: Mapping[str, Any] | None = None) -> PipelineConfig:
    cfg = _build(PipelineConfig, data, "")
    if cfg.concurrency < 1:
        raise ConfigError("concurrency", "must be >= 1")
    if cfg.sample_size < 1:
        raise ConfigError("sample_size", "must be >= 1")
    if not cfg.label_set:
        raise ConfigError("label_set", "must be non-empty")
    return cfg


def env_overrides(environ: Mapping[str, str] | None = None) -> dict[str, Any]:
    """``DSD_LOOP__MAX_TURNS=12`` -> ``{"loop.max_turns": 12}`` (values parsed as YAML)."""
    environ = os.environ if environ is None else environ
    out = {}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX) or key.endswith("_API_KEY"):
            continue
        dotted = key[len(ENV_PREFIX):].lower().replace("__", ".")
        out[dotted] = yaml.safe_load(raw) if raw != "" else None
    return out


def load_config(path: str | Path | None = None, environ: Mapping[str, str] | None = None,
                overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    data: dict[str, Any] = PipelineConfig().to_dict()
    if path is not None:
        try:
            loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config", "top level must be a mapping")
        for section, value in loaded.items():
            if isinstance(value, dict) and isinstance(data.get(section), dict):
                for k, v in value.items():
                    _set_dotted(data, f"{section}.{k}", v)
            else:
                _set_dotted(data, section, value)
    for layer in (env_overrides(environ), overrides or {}):
        for dotted, value in layer.items():
            _set_dotted(data, dotted, value)
    return build_config(data)


def dump_config(cfg: PipelineConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)
