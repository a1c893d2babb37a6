"""
logging_setup.py

Configures the 'independence_patterns' logger with rotating file and console handlers.
"""

import os
import logging
from logging.handlers import RotatingFileHandler
from typing import Optional

from .config import Config

LOGGER_NAME = "independence_patterns"


def setup_logging(log_file: Optional[str] = None, level: Optional[str] = None,
                  config: Optional[Config] = None) -> logging.Logger:
    """
    Configures the 'independence_patterns' logger.

    - RotatingFileHandler at `log_file` (default from config)
    - Console StreamHandler

    Repeated calls replace the handlers instead of stacking them.
    """
    logger = logging.getLogger(LOGGER_NAME)

    cfg = config or Config()
    if log_file is None:
        log_file = cfg.get("Logging", "LogFile")
    if level is None:
        level = cfg.get("Logging", "Level")
    logger.setLevel(getattr(logging, level.upper(), logging.INFO))

    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    log_dir = os.path.dirname(log_file)
    if log_dir and not os.path.isdir(log_dir):
        os.makedirs(log_dir, exist_ok=True)

    # Formatter with ISO 8601 timestamps
    formatter = logging.Formatter(
        fmt="%(asctime)s %(levelname)s [%(name)s] %(message)s",
        datefmt="%Y-%m-%dT%H:%M:%S%z"
    )

    # File handler: rotates after 10 MB, keeps 5 backups
    file_handler = RotatingFileHandler(
        filename=log_file,
        maxBytes=10*1024*1024,
        backupCount=5,
        encoding="utf-8"
    )
    file_handler.setFormatter(formatter)
    logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)
    return logger
