"""Workspace configuration: one declarative JSON file per workspace.

Precedence is CLI flag > environment variable > config file > built-in
default. Secrets never live in the file: the provider section names an
environment variable (api_key_env) and loading rejects any literal key
material.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from rotesql.errors import ConfigError
from rotesql.genclient import ProviderConfig

ENV_PREFIX = "ROTESQL_"
_FORBIDDEN_PROVIDER_KEYS = ("api_key", "apikey", "token", "secret")


@dataclass
class WorkspaceConfig:
    databases: dict[str, str] = field(default_factory=dict)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    tokenizer_file: str | None = None
    output_dir: str = "runs"
    budgets: dict[str, int] = field(default_factory=dict)
    seeds: dict[str, int] = field(default_factory=dict)
    routes: dict[str, str] = field(default_factory=dict)

    def database_path(self, db_id: str) -> str:
        try:
            return self.databases[db_id]
        except KeyError:
            known = ", ".join(sorted(self.databases)) or "none registered"
            raise ConfigError(f"unknown database id {db_id!r} (known: {known})")

    def seed(self, name: str, default: int = 0) -> int:
        return int(self.seeds.get(name, default))


def load_config(path: str | None) -> WorkspaceConfig:
    """Load and validate a workspace file; None gives pure defaults.

    Validation happens before any command work starts: registered database
    paths and the tokenizer file must exist, and provider settings must not
    embed credentials.
    """
    if path is None:
        return WorkspaceConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")

    base = Path(path).resolve().parent

    def resolve(p: str) -> str:
        candidate = Path(p)
        if not candidate.is_absolute():
            candidate = base / candidate
        return str(candidate)

    databases = {}
    for db_id, db_path in dict(raw.get("databases", {})).items():
        full = resolve(db_path)
        if not os.path.exists(full):
            raise ConfigError(f"registered database {db_id!r} missing: {full}")
        databases[db_id] = full

    provider_raw = dict(raw.get("provider", {}))
    for forbidden in _FORBIDDEN_PROVIDER_KEYS:
        if forbidden in provider_raw:
            raise ConfigError(
                f"provider.{forbidden} not allowed in config files;"
                " set the environment variable named by provider.api_key_env"
            )
    allowed = {
        "provider", "endpoint", "model", "api_key_env",
        "temperature_skeleton", "temperature_sql", "temperature_nlq",
        "max_retries", "request_timeout", "max_concurrency", "seed",
        "mock_invalid_every", "exec_timeout",
    }
    unknown = set(provider_raw) - allowed
    if unknown:
        raise ConfigError(f"unknown provider settings: {', '.join(sorted(unknown))}")
    provider = ProviderConfig(**provider_raw)

    tokenizer_file = raw.get("tokenizer_file")
    if tokenizer_file is not None:
        tokenizer_file = resolve(tokenizer_file)
        if not os.path.exists(tokenizer_file):
            raise ConfigError(f"tokenizer file missing: {tokenizer_file}")

    return WorkspaceConfig(
        databases=databases,
        provider=provider,
        tokenizer_file=tokenizer_file,
        output_dir=raw.get("output_dir", "runs"),
        budgets={k: int(v) for k, v in dict(raw.get("budgets", {})).items()},
        seeds={k: int(v) for k, v in dict(raw.get("seeds", {})).items()},
        routes=dict(raw.get("routes", {})),
    )


def from_env(name: str) -> str | None:
    return os.environ.get(ENV_PREFIX + name.upper())


def pick(cli_value, env_name: str, file_value, default):
    """CLI > environment > config file > default."""
    if cli_value is not None:
        return cli_value
    env_value = from_env(env_name)
    if env_value is not None:
        return env_value
    if file_value is not None:
        return file_value
    return default
