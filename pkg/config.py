"""
Environment configuration for the ProjectCarleson system.

Only two settings come from the environment (or a .env file); every
numerical tunable lives in ExperimentConfig.
"""
import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

from models.experiment import ExperimentConfig

# Initialize logging
logger = logging.getLogger(__name__)

load_dotenv()

DEFAULT_OUTPUT_DIR = "output"
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def thread_count() -> int:
    """Worker threads for sharded pool location (CARLESON_THREADS, default 1)."""
    raw = os.environ.get("CARLESON_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        logger.warning(f"Ignoring CARLESON_THREADS={raw!r}: not an integer")
        return 1
    return max(threads, 1)


def output_dir() -> str:
    return os.environ.get("CARLESON_OUTPUT_DIR", DEFAULT_OUTPUT_DIR)


def load_config(path: Optional[str] = None, **overrides) -> ExperimentConfig:
    """
    Build an ExperimentConfig from an optional JSON file plus key overrides.

    Overrides equal to None are ignored, so unset command-line flags keep the
    file (or default) values.

    Raises:
        pydantic.ValidationError: if the merged values violate a constraint
    """
    base = ExperimentConfig.parse_file(Path(path)) if path else ExperimentConfig()
    values = base.dict()
    values.update({key: value for key, value in overrides.items() if value is not None})
    if overrides.get("out") is None and not path:
        values["out"] = output_dir()
    return ExperimentConfig(**values)
