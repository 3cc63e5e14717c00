"""Runtime configuration: defaults, then config file, then environment.

Kept deliberately small: paths, service binding, and backend settings.
CLI flags override all of this at the call site.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import MaltriageError

ENV_PREFIX = "MALTRIAGE_"


class ConfigError(MaltriageError):
    pass


def default_data_dir() -> Path:
    return Path(os.environ.get(ENV_PREFIX + "HOME", "~/.maltriage")).expanduser()


@dataclass
class BackendSettings:
    url: str | None = None
    model: str = "default"
    auth_token: str | None = None
    timeout: float = 30.0
    retries: int = 2
    max_in_flight: int = 4


@dataclass
class AppConfig:
    store_path: Path = field(default_factory=lambda: default_data_dir() / "store.db")
    kb_path: Path = field(default_factory=lambda: default_data_dir() / "kb_snapshot.jsonl")
    template_dir: Path | None = None  # None = bundled templates
    static_dir: Path | None = None  # None = placeholder page
    host: str = "127.0.0.1"  # localhost by default: the service is unauthenticated
    port: int = 8378
    mock_script: Path | None = None
    backend: BackendSettings = field(default_factory=BackendSettings)


_PATH_KEYS = ("store_path", "kb_path", "template_dir", "static_dir", "mock_script")


def load_config(path: str | Path | None = None) -> AppConfig:
    """Build the effective config. Precedence: defaults < file < env."""
    cfg = AppConfig()

    file_path = path or os.environ.get(ENV_PREFIX + "CONFIG")
    if file_path:
        try:
            doc = json.loads(Path(file_path).read_text("utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {file_path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed config {file_path}: {exc}") from exc
        for key in _PATH_KEYS:
            if doc.get(key) is not None:
                setattr(cfg, key, Path(doc[key]))
        if "host" in doc:
            cfg.host = str(doc["host"])
        if "port" in doc:
            cfg.port = int(doc["port"])
        for key in ("url", "model", "auth_token"):
            if doc.get("backend", {}).get(key) is not None:
                setattr(cfg.backend, key, doc["backend"][key])
        for key in ("timeout", "retries", "max_in_flight"):
            if doc.get("backend", {}).get(key) is not None:
                setattr(cfg.backend, key, type(getattr(cfg.backend, key))(doc["backend"][key]))

    env = os.environ
    if env.get(ENV_PREFIX + "STORE"):
        cfg.store_path = Path(env[ENV_PREFIX + "STORE"])
    if env.get(ENV_PREFIX + "KB"):
        cfg.kb_path = Path(env[ENV_PREFIX + "KB"])
    if env.get(ENV_PREFIX + "TEMPLATES"):
        cfg.template_dir = Path(env[ENV_PREFIX + "TEMPLATES"])
    if env.get(ENV_PREFIX + "STATIC"):
        cfg.static_dir = Path(env[ENV_PREFIX + "STATIC"])
    if env.get(ENV_PREFIX + "HOST"):
        cfg.host = env[ENV_PREFIX + "HOST"]
    if env.get(ENV_PREFIX + "PORT"):
        cfg.port = int(env[ENV_PREFIX + "PORT"])
    if env.get(ENV_PREFIX + "MOCK_SCRIPT"):
        cfg.mock_script = Path(env[ENV_PREFIX + "MOCK_SCRIPT"])
    if env.get(ENV_PREFIX + "BACKEND_URL"):
        cfg.backend.url = env[ENV_PREFIX + "BACKEND_URL"]
    if env.get(ENV_PREFIX + "BACKEND_MODEL"):
        cfg.backend.model = env[ENV_PREFIX + "BACKEND_MODEL"]
    if env.get(ENV_PREFIX + "BACKEND_TOKEN"):
        cfg.backend.auth_token = env[ENV_PREFIX + "BACKEND_TOKEN"]
    return cfg
