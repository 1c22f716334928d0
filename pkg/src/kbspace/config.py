"""Engine configuration: YAML file, then ``KBSPACE_*`` environment variables, then flags."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .scoring import DEFAULT_K_MAX, DEFAULT_WEIGHTS, SignalWeights
from .validation import check_depth, check_k, check_p

ENV_PREFIX = "KBSPACE_"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    bundle: str | None = None
    embeddings: str | None = None
    weights: tuple[float, float, float, float] = DEFAULT_WEIGHTS
    d: int = 20
    k: int | str = "auto"
    k_max: int = DEFAULT_K_MAX
    p: int | float | str = 1000
    bm25_top_n: int | None = None
    stopwords: str | None = None
    host: str = "127.0.0.1"
    port: int = 8000

    def validate(self, require_paths: bool = True) -> "EngineConfig":
        try:
            weights = SignalWeights.coerce(self.weights).as_tuple()
            cfg = replace(
                self,
                weights=weights,
                d=check_depth(self.d),
                k=check_k(self.k),
                k_max=check_depth(self.k_max),
                p=check_p(self.p),
                bm25_top_n=None if self.bm25_top_n is None else check_depth(self.bm25_top_n),
                port=int(self.port),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        if require_paths:
            if cfg.bundle is None:
                raise ConfigError("no index bundle configured")
            for name in ("bundle", "embeddings", "stopwords"):
                value = getattr(cfg, name)
                if value is not None and not Path(value).exists():
                    raise ConfigError(f"{name} path does not exist: {value}")
        return cfg

    def estimator_params(self) -> dict:
        return {
            "embeddings": self.embeddings,
            "d": self.d,
            "k": self.k,
            "k_max": self.k_max,
            "p": self.p,
            "weights": tuple(self.weights),
            "bm25_top_n": self.bm25_top_n,
            "stopwords": self.stopwords,
        }


_INT_KEYS = {"d", "k_max", "port", "bm25_top_n"}


def _coerce(key: str, value: Any) -> Any:
    if value is None or not isinstance(value, str):
        return value
    if key in _INT_KEYS:
        return int(value)
    if key == "k":
        return value if value == "auto" else int(value)
    if key == "weights":
        return tuple(float(v) for v in value.replace(",", " ").split())
    return value


def load_config(
    path=None,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
    require_paths: bool = True,
) -> EngineConfig:
    names = {f.name for f in fields(EngineConfig)}
    values: dict[str, Any] = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: expected a mapping at top level")
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
        base = Path(path).parent
        for key in ("bundle", "embeddings", "stopwords"):
            if data.get(key) is not None:
                data[key] = str((base / data[key]).resolve()) if not os.path.isabs(data[key]) else data[key]
        values.update(data)
    env = os.environ if env is None else env
    for key in names:
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            values[key] = raw
    for key, value in (overrides or {}).items():
        if key not in names:
            raise ConfigError(f"unknown setting {key!r}")
        if value is not None:
            values[key] = value
    try:
        values = {k: _coerce(k, v) for k, v in values.items()}
        if "weights" in values:
            values["weights"] = tuple(values["weights"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return EngineConfig(**values).validate(require_paths)
