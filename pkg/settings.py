from __future__ import annotations

import os
from pathlib import Path

from dotenv import load_dotenv

# ---------- env ----------
load_dotenv()  # .env in the working directory, never overrides real env vars


def env_int(name: str, default: int) -> int:
    try:
        return int(os.getenv(name, str(default)))
    except Exception:
        return default


def env_path(name: str, default: str) -> Path:
    return Path(os.getenv(name, default)).expanduser()


def output_root() -> Path:
    """Default root for run/sweep output; `CCH_OUTPUT_ROOT` overrides."""
    return env_path("CCH_OUTPUT_ROOT", "results")


def log_dir() -> Path:
    return env_path("CCH_LOG_DIR", "logs")


def log_level() -> str:
    return os.getenv("CCH_LOG_LEVEL", "INFO").strip().upper()


def default_jobs() -> int:
    return max(1, env_int("CCH_JOBS", 1))
