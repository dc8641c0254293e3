import os
from dotenv import load_dotenv

load_dotenv()


def _int_env(name: str, default: int, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"❌ {name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ValueError(f"❌ {name} must be >= {minimum}, got {value}")
    return value


class Config:
    OUTPUT_DIR = os.getenv("XLMIMO_OUTPUT_DIR", "results")
    LEDGER_PATH = os.getenv("XLMIMO_LEDGER_PATH", "xlmimo_runs.db")
    LOG_DIR = os.getenv("XLMIMO_LOG_DIR", "logs")

    LOG_LEVEL = os.getenv("XLMIMO_LOG_LEVEL", "INFO").upper()
    if LOG_LEVEL not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ValueError(f"❌ XLMIMO_LOG_LEVEL is not a logging level: {LOG_LEVEL}")

    WORKERS = _int_env("XLMIMO_WORKERS", 4, 1)
    DEFAULT_SEED = _int_env("XLMIMO_DEFAULT_SEED", 2024, 0)

config = Config()
