import os
import shlex
import logging
from typing import Any, Dict, Optional

from dotenv import load_dotenv, dotenv_values

from .core import physical_core_count

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)


class Config:
    """Configuration class for the bi-objective tuning toolkit"""

    # Reproducibility
    SEED = int(os.getenv("BIOBJ_TUNE_SEED", "0"))

    # Energy measurement
    STATIC_POWER_W = float(os.getenv("STATIC_POWER_W", "0"))
    ENERGY_SOURCE = os.getenv("ENERGY_SOURCE", "synthetic")
    REPLAY_PATH = os.getenv("REPLAY_PATH")
    COMMAND_ARGV = shlex.split(os.getenv("COMMAND_ARGV", ""))
    SYNTHETIC_EXPR_ID = os.getenv("SYNTHETIC_EXPR_ID", "unit")
    COMMAND_COVER_TIMEOUT_S = float(os.getenv("COMMAND_COVER_TIMEOUT_S", "5"))

    # Sweep
    CORES = int(os.getenv("CORES", str(physical_core_count())))
    TRANSPOSE_BLOCK = int(os.getenv("TRANSPOSE_BLOCK", "64"))
    PRECISION_PRESET = os.getenv("PRECISION_PRESET", "methodology")
    FAILURE_BUDGET = int(os.getenv("FAILURE_BUDGET", "0"))
    ANOMALY_RETRIES = int(os.getenv("ANOMALY_RETRIES", "3"))
    PRE_EXEC_HOOK = os.getenv("PRE_EXEC_HOOK")

    LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

    ENERGY_SOURCES = ("replay", "command", "synthetic")
    PRECISION_PRESETS = ("methodology", "api")

    # Keys accepted in a --config file
    FILE_KEYS = (
        "static_power_w",
        "energy_source",
        "replay_path",
        "command_argv",
        "synthetic_expr_id",
    )

    @classmethod
    def validate(cls):
        """Validate configuration"""
        if cls.STATIC_POWER_W < 0:
            raise ValueError(
                "STATIC_POWER_W must be non-negative. "
                "Please check your .env file or environment."
            )

        if cls.ENERGY_SOURCE not in cls.ENERGY_SOURCES:
            raise ValueError(
                f"ENERGY_SOURCE must be one of {', '.join(cls.ENERGY_SOURCES)}, "
                f"got '{cls.ENERGY_SOURCE}'"
            )

        if cls.CORES < 1:
            raise ValueError("CORES must be at least 1")

        if cls.TRANSPOSE_BLOCK < 1:
            raise ValueError("TRANSPOSE_BLOCK must be at least 1")

        if cls.PRECISION_PRESET not in cls.PRECISION_PRESETS:
            raise ValueError(
                f"PRECISION_PRESET must be one of {', '.join(cls.PRECISION_PRESETS)}"
            )

        if cls.FAILURE_BUDGET < 0 or cls.ANOMALY_RETRIES < 0:
            raise ValueError("FAILURE_BUDGET and ANOMALY_RETRIES must be non-negative")

        if cls.ENERGY_SOURCE == "replay" and not cls.REPLAY_PATH:
            logger.warning(
                "ENERGY_SOURCE is 'replay' but REPLAY_PATH is not set; "
                "pass --energy replay:<path> on the command line."
            )

        logger.debug("Configuration validated successfully")
        return True

    @classmethod
    def from_file(cls, path: str) -> Dict[str, Any]:
        """Read a dotenv-syntax sweep config file into typed overrides"""
        if not os.path.exists(path):
            raise FileNotFoundError(f"Config file not found: {path}")

        raw = dotenv_values(path)
        unknown = sorted(set(raw) - set(cls.FILE_KEYS))
        if unknown:
            raise ValueError(f"Unknown config keys in {path}: {', '.join(unknown)}")

        overrides: Dict[str, Any] = {}
        for key, value in raw.items():
            if value is None or value == "":
                continue
            if key == "static_power_w":
                overrides[key] = float(value)
            elif key == "command_argv":
                overrides[key] = shlex.split(value)
            else:
                overrides[key] = value

        source = overrides.get("energy_source")
        if source is not None and source not in cls.ENERGY_SOURCES:
            raise ValueError(f"energy_source must be one of {', '.join(cls.ENERGY_SOURCES)}")

        logger.info(f"Loaded {len(overrides)} settings from {path}")
        return overrides

    @classmethod
    def log_level(cls, override: Optional[str] = None) -> int:
        return getattr(logging, (override or cls.LOG_LEVEL).upper(), logging.INFO)


# Validate configuration on import
Config.validate()
