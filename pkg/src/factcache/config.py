"""Configuration loading for the command-line tool.

One JSON document configures the slow source, the model client, pipeline
knobs, evaluation parameters, and data paths. Anything omitted falls back
to a sensible default; referenced input paths must resolve at load time.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .metrics import SUREParams

DEFAULT_CONFIG_PATH = "./factcache.json"


@dataclass
class Config:
    # store
    state_path: str = "./factcache_state.json"
    capacity: Optional[int] = None
    prefetch_depth: int = 1
    # slow source
    slow_kind: str = "memory"  # memory | local_dump | remote_sparql
    slow_locator: str = ""
    # model client
    model_kind: str = "mock"  # mock | http
    model_endpoint: str = ""
    api_key_env: str = ""
    model_max_tokens: int = 64
    model_priors: dict[str, str] = field(default_factory=dict)
    # pipeline
    k: int = 1
    max_hops: int = 5
    scorer: str = "lexical"
    extractor: str = "alias_dictionary"
    # eval
    sure_params: SUREParams = field(default_factory=SUREParams)
    seed: int = 7
    # data
    templates_path: str = ""
    entities_path: str = ""
    benchmark_path: str = ""
    multihop_path: str = ""

    def api_key(self) -> Optional[str]:
        if not self.api_key_env:
            return None
        return os.environ.get(self.api_key_env)


def load_config(path: Optional[str] = None) -> Config:
    """Read the config file; a missing default file yields pure defaults."""
    config_path = Path(path or DEFAULT_CONFIG_PATH)
    if not config_path.exists():
        if path is not None:
            raise ConfigError(f"config file not found: {path}")
        return Config()
    try:
        raw = json.loads(config_path.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc

    store = raw.get("store", {})
    slow = raw.get("slow_source", {})
    model = raw.get("model", {})
    pipe = raw.get("pipeline", {})
    eval_cfg = raw.get("eval", {})
    data = raw.get("data", {})

    try:
        cfg = Config(
            state_path=store.get("state_path", "./factcache_state.json"),
            capacity=store.get("capacity"),
            prefetch_depth=store.get("prefetch_depth", 1),
            slow_kind=slow.get("kind", "memory"),
            slow_locator=slow.get("locator", ""),
            model_kind=model.get("kind", "mock"),
            model_endpoint=model.get("endpoint", "") or "",
            api_key_env=model.get("api_key_env", "") or "",
            model_max_tokens=model.get("max_tokens", 64),
            model_priors=dict(model.get("priors", {})),
            k=pipe.get("k", 1),
            max_hops=pipe.get("max_hops", 5),
            scorer=pipe.get("scorer", "lexical"),
            extractor=pipe.get("extractor", "alias_dictionary"),
            sure_params=SUREParams(**eval_cfg.get("sure", {})),
            seed=eval_cfg.get("seed", 7),
            templates_path=data.get("templates_path", "") or "",
            entities_path=data.get("entities_path", "") or "",
            benchmark_path=data.get("benchmark_path", "") or "",
            multihop_path=data.get("multihop_path", "") or "",
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc

    _validate(cfg, config_path.parent)
    return cfg


def _validate(cfg: Config, base: Path) -> None:
    if cfg.slow_kind not in ("memory", "local_dump", "remote_sparql"):
        raise ConfigError(f"unknown slow source kind: {cfg.slow_kind!r}")
    if cfg.slow_kind == "local_dump":
        if not cfg.slow_locator:
            raise ConfigError("local_dump slow source needs a locator path")
        resolved = _resolve(base, cfg.slow_locator)
        if not resolved.exists():
            raise ConfigError(f"slow source dump not found: {resolved}")
        cfg.slow_locator = str(resolved)
    if cfg.slow_kind == "remote_sparql" and not cfg.slow_locator:
        raise ConfigError("remote_sparql slow source needs an endpoint URL")
    if cfg.model_kind not in ("mock", "http"):
        raise ConfigError(f"unknown model kind: {cfg.model_kind!r}")
    if cfg.model_kind == "http" and not cfg.model_endpoint:
        raise ConfigError("http model needs an endpoint")
    if cfg.k < 1:
        raise ConfigError("pipeline.k must be >= 1")
    if cfg.max_hops < 1:
        raise ConfigError("pipeline.max_hops must be >= 1")
    if cfg.prefetch_depth < 0:
        raise ConfigError("store.prefetch_depth must be >= 0")
    if cfg.capacity is not None and cfg.capacity < 1:
        raise ConfigError("store.capacity must be >= 1 when set")
    if cfg.scorer not in ("lexical",):
        raise ConfigError(f"unknown scorer: {cfg.scorer!r}")
    if cfg.extractor not in ("alias_dictionary", "model_prompted"):
        raise ConfigError(f"unknown extractor: {cfg.extractor!r}")
    cfg.state_path = str(_resolve(base, cfg.state_path))
    for attr in ("templates_path", "entities_path", "benchmark_path",
                 "multihop_path"):
        value = getattr(cfg, attr)
        if value:
            resolved = _resolve(base, value)
            if not resolved.exists():
                raise ConfigError(f"{attr} does not exist: {resolved}")
            setattr(cfg, attr, str(resolved))


def _resolve(base: Path, value: str) -> Path:
    p = Path(value)
    return p if p.is_absolute() else (base / p)
