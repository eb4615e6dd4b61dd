"""Pipeline configuration: JSON file, exact-decimal prices, no secrets.

API keys never live in config files; only the *name* of the environment
variable that holds them does.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .errors import ContractError


@dataclass(frozen=True)
class BackendConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model_id: str = "gpt-3.5-turbo-1106"
    api_key_env: str = "CXMINE_API_KEY"
    max_retries: int = 2
    requests_per_second: float | None = None
    max_concurrency: int = 1


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8321
    static_dir: str | None = None
    api_token: str | None = None


@dataclass(frozen=True)
class Config:
    backend: BackendConfig = field(default_factory=BackendConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    c_hr: Decimal = Decimal("0.2")
    c_api_in: Decimal = Decimal("0.000001")
    c_api_out: Decimal = Decimal("0.000002")
    per_class_cap: int = 5
    pattern: str = "cmc"
    candidates_path: str = "candidates.jsonl"
    sentences_path: str = "sentences.jsonl"
    events_path: str = "events.jsonl"

    def __post_init__(self):
        for name in ("c_hr", "c_api_in", "c_api_out"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")
        if self.per_class_cap < 0:
            raise ContractError("per_class_cap must be non-negative")
        if not 0 < self.service.port < 65536:
            raise ContractError(f"port {self.service.port} out of range")


def _decimal(value, name: str) -> Decimal:
    if isinstance(value, float):
        raise ContractError(f"{name} must be a string in config, not a float")
    try:
        return Decimal(str(value))
    except InvalidOperation:
        raise ContractError(f"{name} is not a decimal: {value!r}") from None


def config_from_dict(d: dict) -> Config:
    backend = BackendConfig(**d.get("backend", {}))
    service = ServiceConfig(**d.get("service", {}))
    prices = d.get("prices", {})
    return Config(
        backend=backend,
        service=service,
        c_hr=_decimal(d.get("c_hr", "0.2"), "c_hr"),
        c_api_in=_decimal(prices.get("c_api_in", "0.000001"), "c_api_in"),
        c_api_out=_decimal(prices.get("c_api_out", "0.000002"), "c_api_out"),
        per_class_cap=int(d.get("sampler", {}).get("per_class_cap", 5)),
        pattern=d.get("pattern", "cmc"),
        candidates_path=d.get("storage", {}).get("candidates", "candidates.jsonl"),
        sentences_path=d.get("storage", {}).get("sentences", "sentences.jsonl"),
        events_path=d.get("storage", {}).get("events", "events.jsonl"),
    )


def config_to_dict(cfg: Config) -> dict:
    return {
        "backend": {
            "endpoint": cfg.backend.endpoint,
            "model_id": cfg.backend.model_id,
            "api_key_env": cfg.backend.api_key_env,
            "max_retries": cfg.backend.max_retries,
            "requests_per_second": cfg.backend.requests_per_second,
            "max_concurrency": cfg.backend.max_concurrency,
        },
        "service": {
            "host": cfg.service.host,
            "port": cfg.service.port,
            "static_dir": cfg.service.static_dir,
            "api_token": cfg.service.api_token,
        },
        "c_hr": str(cfg.c_hr),
        "prices": {"c_api_in": str(cfg.c_api_in), "c_api_out": str(cfg.c_api_out)},
        "sampler": {"per_class_cap": cfg.per_class_cap},
        "pattern": cfg.pattern,
        "storage": {
            "candidates": cfg.candidates_path,
            "sentences": cfg.sentences_path,
            "events": cfg.events_path,
        },
    }


def load_config(path: str | Path) -> Config:
    path = Path(path)
    if not path.exists():
        raise ContractError(f"config file not found: {path}")
    with open(path, encoding="utf-8") as f:
        cfg = config_from_dict(json.load(f))
    if cfg.pattern != "cmc" and not Path(cfg.pattern).exists():
        raise ContractError(f"pattern file not found: {cfg.pattern}")
    return cfg


def dump_config(cfg: Config) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"
