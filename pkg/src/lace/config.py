"""Engine configuration: a JSON file describing providers, paths, and limits.

Provider entries choose between the HTTP implementations and the
deterministic mocks, so the same gateway code runs offline.  Credentials
never appear in the file; an ``http`` entry names an environment variable
and the value is read only when a call is made.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .providers import (
    ChatProvider,
    EmbeddingProvider,
    EntailmentProvider,
    HttpChatProvider,
    HttpEmbeddingProvider,
    HttpEntailmentProvider,
    MockChatProvider,
    MockEmbeddingProvider,
    MockEntailmentProvider,
    ProviderConfig,
)

_PROVIDER_KINDS = ("http", "mock", "none")


@dataclass
class EngineConfig:
    base_dir: Path
    embedding_dimension: int = 256
    top_k: int | None = 5
    listen: str = "127.0.0.1:8000"
    enumeration_bound: int = 10_000_000
    taxonomy_path: Path | None = None
    policies_path: Path | None = None
    corpus_path: Path | None = None
    audit_path: Path = Path("audit.jsonl")
    chat: dict = field(default_factory=lambda: {"provider": "none"})
    embedding: dict = field(default_factory=lambda: {"provider": "mock"})
    entailment: dict = field(default_factory=lambda: {"provider": "mock"})


def _resolve(base: Path, value) -> Path:
    path = Path(value)
    if not path.is_absolute():
        path = base / path
    # pin the location now: a daemon's working directory can change (or be
    # deleted) long after the config was read, and relative paths would
    # silently start resolving somewhere else
    return path.resolve()


def _check_entry(entry, name: str) -> dict:
    if not isinstance(entry, dict):
        raise ConfigError(f"{name} must be an object")
    kind = entry.get("provider")
    if kind not in _PROVIDER_KINDS:
        raise ConfigError(
            f"{name}.provider must be one of {', '.join(_PROVIDER_KINDS)}"
        )
    if kind == "http":
        for key in ("endpoint", "model"):
            if not isinstance(entry.get(key), str) or not entry[key]:
                raise ConfigError(f"{name}.{key} is required for an http provider")
    return entry


def load_config(path: str | Path) -> EngineConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")

    base = path.parent
    config = EngineConfig(base_dir=base)

    dimension = raw.get("embedding_dimension", 256)
    if not isinstance(dimension, int) or dimension < 2:
        raise ConfigError("embedding_dimension must be an integer of at least 2")
    config.embedding_dimension = dimension

    top_k = raw.get("top_k", 5)
    if top_k is not None and (not isinstance(top_k, int) or top_k < 1):
        raise ConfigError("top_k must be a positive integer or null")
    config.top_k = top_k

    listen = raw.get("listen", "127.0.0.1:8000")
    if (
        not isinstance(listen, str)
        or ":" not in listen
        or not listen.rsplit(":", 1)[1].isdigit()
    ):
        raise ConfigError("listen must be a host:port string")
    config.listen = listen

    bound = raw.get("enumeration_bound", 10_000_000)
    if not isinstance(bound, int) or bound < 1:
        raise ConfigError("enumeration_bound must be a positive integer")
    config.enumeration_bound = bound

    for key, attr in (
        ("taxonomy", "taxonomy_path"),
        ("policies", "policies_path"),
        ("corpus", "corpus_path"),
    ):
        if raw.get(key) is not None:
            if not isinstance(raw[key], str):
                raise ConfigError(f"{key} must be a path string")
            setattr(config, attr, _resolve(base, raw[key]))

    audit = raw.get("audit", "audit.jsonl")
    if not isinstance(audit, str):
        raise ConfigError("audit must be a path string")
    config.audit_path = _resolve(base, audit)

    for key in ("chat", "embedding", "entailment"):
        if key in raw:
            setattr(config, key, _check_entry(raw[key], key))
    return config


def _provider_config(entry: dict) -> ProviderConfig:
    return ProviderConfig(
        endpoint=entry["endpoint"],
        model=entry["model"],
        credential_env=entry.get("credential_env"),
        timeout=entry.get("timeout", 30.0),
        max_retries=entry.get("max_retries", 2),
        backoff_seconds=entry.get("backoff_seconds", 0.5),
    )


def _load_script(entry: dict, base: Path) -> dict:
    script_path = entry.get("script")
    if script_path is None:
        return {}
    try:
        script = json.loads(_resolve(base, script_path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"chat script not found: {script_path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"chat script is not valid JSON: {exc}")
    if not isinstance(script, dict):
        raise ConfigError("chat script must map prompt hashes to replies")
    for key, value in script.items():
        ok = isinstance(value, str) or (
            isinstance(value, list) and all(isinstance(v, str) for v in value)
        )
        if not ok:
            raise ConfigError(f"chat script entry {key!r} must be a string or list")
    return script


def build_chat_provider(config: EngineConfig) -> ChatProvider | None:
    entry = config.chat
    if entry["provider"] == "none":
        return None
    if entry["provider"] == "mock":
        return MockChatProvider(_load_script(entry, config.base_dir))
    return HttpChatProvider(_provider_config(entry))


def build_embedding_provider(config: EngineConfig) -> EmbeddingProvider:
    entry = config.embedding
    if entry["provider"] == "none":
        raise ConfigError("an embedding provider is required")
    if entry["provider"] == "mock":
        return MockEmbeddingProvider(
            entry.get("dimension", config.embedding_dimension)
        )
    return HttpEmbeddingProvider(
        _provider_config(entry), dimension=entry.get("dimension")
    )


def build_entailment_provider(config: EngineConfig) -> EntailmentProvider | None:
    entry = config.entailment
    if entry["provider"] == "none":
        return None
    if entry["provider"] == "mock":
        return MockEntailmentProvider()
    return HttpEntailmentProvider(_provider_config(entry))
