from __future__ import annotations

import logging

LOG_FORMAT = "%(asctime)s - %(funcName)s - %(lineno)d - %(levelname)s - %(message)s"


def configure_logging(level: str | int = logging.INFO) -> None:
    """Install the project-wide log format on the root logger."""
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
