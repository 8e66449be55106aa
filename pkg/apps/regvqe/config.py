import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

from .core.pauli import PROJECT_ROOT
from .errors import ConfigError

# Load .env (existing environment wins so that CLI wrappers can override)
load_dotenv(".env", override=False)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class Settings:
    workers: int
    cache_dir: Path
    log_level: str = "INFO"
    # debug: initial gradient check and strong-Wolfe assertions
    debug: bool = False


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}") from None
    if value < 1:
        raise ConfigError(f"{name} must be positive, got {value}")
    return value


def get_settings() -> Settings:
    cache_dir = Path(os.getenv("REGVQE_CACHE_DIR", "data/cache"))
    if not cache_dir.is_absolute():
        cache_dir = PROJECT_ROOT / cache_dir
    settings = Settings(
        workers=_int_env("REGVQE_WORKERS", os.cpu_count() or 1),
        cache_dir=cache_dir,
        log_level=os.getenv("REGVQE_LOG_LEVEL", "INFO").upper(),
        debug=os.getenv("REGVQE_DEBUG", "0") == "1",
    )
    if settings.log_level not in LOG_LEVELS:
        raise ConfigError(f"REGVQE_LOG_LEVEL must be one of {', '.join(LOG_LEVELS)}, got {settings.log_level!r}")
    return settings
