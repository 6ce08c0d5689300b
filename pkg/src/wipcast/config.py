"""Pipeline configuration: one JSON-serializable object covering every stage.

The config is the single source of defaults (k=5 retrievals, 7-day windows,
14-day trend lookback, rules fusion). Credentials never live here; remote
backends read their API key from an environment variable named in the config.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from typing import IO, Mapping

from .agents import DEFAULT_FUSION_WEIGHTS, TREND_LABELS
from .llm import AGENT_IDS
from .memory import DeterministicEmbedder, RemoteEmbedder, RetentionPolicy
from .wipseries import GAP_POLICIES, LifecycleConfig


@dataclass(frozen=True)
class InputConfig:
    path: str = ""
    format: str = "auto"  # auto | xes | csv
    case_column: str = "case"
    activity_column: str = "activity"
    timestamp_column: str = "timestamp"
    lifecycle_column: str | None = None
    timestamp_format: str | None = None
    timezone: str = "UTC"

    def __post_init__(self):
        if self.format not in ("auto", "xes", "csv"):
            raise ValueError(f"unknown input format: {self.format}")


@dataclass(frozen=True)
class EmbedderConfig:
    kind: str = "deterministic"  # deterministic | remote
    endpoint: str = ""
    model: str = "bge-base-en-v1.5"

    def __post_init__(self):
        if self.kind not in ("deterministic", "remote"):
            raise ValueError(f"unknown embedder kind: {self.kind}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote embedder needs an endpoint")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "stub"  # stub | remote
    endpoint: str = ""
    model: str = "o3-mini"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    retries: int = 2

    def __post_init__(self):
        if self.kind not in ("stub", "remote"):
            raise ValueError(f"unknown backend kind: {self.kind}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backend needs an endpoint")
        if self.timeout <= 0 or self.retries < 0:
            raise ValueError("timeout must be positive and retries nonnegative")


@dataclass(frozen=True)
class ForecastParams:
    k: int = 5
    window: int = 7
    trend_window: int = 7
    trend_lookback: int = 14
    trend_thresholds: tuple[float, float] = (0.01, 0.05)
    fusion_mode: str = "rules"  # rules | react
    fusion_weights: dict[str, dict[str, float]] | None = None
    max_age_days: int | None = None
    min_similarity: float | None = None

    def __post_init__(self):
        for name in ("k", "window", "trend_window", "trend_lookback"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        minor, major = self.trend_thresholds
        if not 0 < minor < major:
            raise ValueError("trend thresholds must satisfy 0 < minor < major")
        if self.fusion_mode not in ("rules", "react"):
            raise ValueError(f"unknown fusion mode: {self.fusion_mode}")
        if self.fusion_weights is not None:
            for label, row in self.fusion_weights.items():
                if label not in TREND_LABELS:
                    raise ValueError(f"unknown trend label in weights: {label}")
                if set(row) != set(AGENT_IDS):
                    raise ValueError(f"weights for {label} must cover {AGENT_IDS}")
                if any(w < 0 for w in row.values()):
                    raise ValueError(f"weights for {label} must be nonnegative")
                if abs(sum(row.values()) - 1.0) > 1e-9:
                    raise ValueError(f"weights for {label} must sum to 1")

    def retention(self) -> RetentionPolicy:
        return RetentionPolicy(max_age_days=self.max_age_days,
                               min_similarity=self.min_similarity)

    def weights(self) -> dict[str, dict[str, float]]:
        return self.fusion_weights if self.fusion_weights is not None else DEFAULT_FUSION_WEIGHTS


@dataclass(frozen=True)
class PipelineConfig:
    input: InputConfig = field(default_factory=InputConfig)
    lifecycle: str = "default"
    gap_policy: str = "carry"
    forecast: ForecastParams = field(default_factory=ForecastParams)
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    split_date: str | None = None  # ISO date; None = last 20% of days as test
    test_fraction: float = 0.2
    out_dir: str = "out"
    freeze_timestamps: bool = False

    def __post_init__(self):
        if self.gap_policy not in GAP_POLICIES:
            raise ValueError(f"unknown gap policy: {self.gap_policy}")
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")


_SECTIONS = {"input": InputConfig, "forecast": ForecastParams,
             "embedder": EmbedderConfig, "backend": BackendConfig}


def _build_section(cls, data: Mapping):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    kwargs = dict(data)
    if cls is ForecastParams and "trend_thresholds" in kwargs:
        kwargs["trend_thresholds"] = tuple(kwargs["trend_thresholds"])
    return cls(**kwargs)


def config_from_dict(data: Mapping) -> PipelineConfig:
    known = {f.name for f in fields(PipelineConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value)
        else:
            kwargs[key] = value
    return PipelineConfig(**kwargs)


def config_to_dict(cfg: PipelineConfig) -> dict:
    data = asdict(cfg)
    data["forecast"]["trend_thresholds"] = list(cfg.forecast.trend_thresholds)
    return data


def load_config(fp: IO[str] | str) -> PipelineConfig:
    text = fp if isinstance(fp, str) else fp.read()
    return config_from_dict(json.loads(text))


def save_config(cfg: PipelineConfig, fp: IO[str]) -> None:
    json.dump(config_to_dict(cfg), fp, indent=2, sort_keys=True)
    fp.write("\n")


LIFECYCLES = {"default": LifecycleConfig()}


def build_lifecycle(name: str) -> LifecycleConfig:
    if name not in LIFECYCLES:
        raise ValueError(f"unknown lifecycle ruleset: {name} (have: {sorted(LIFECYCLES)})")
    return LIFECYCLES[name]


def build_embedder(cfg: EmbedderConfig):
    if cfg.kind == "deterministic":
        return DeterministicEmbedder()
    return RemoteEmbedder(endpoint=cfg.endpoint, model=cfg.model)


def build_backend(cfg: BackendConfig):
    from .llm import RemoteChatBackend, StubBackend

    if cfg.kind == "stub":
        return StubBackend()
    return RemoteChatBackend(endpoint=cfg.endpoint, model=cfg.model,
                             api_key_env=cfg.api_key_env, timeout=cfg.timeout,
                             retries=cfg.retries)
