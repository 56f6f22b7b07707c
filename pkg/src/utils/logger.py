"""Logging configuration"""
import logging
import os
import sys
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


def _level_from_env() -> int:
    """Resolve GP_LOG_LEVEL (e.g. 'DEBUG') to a logging level, INFO if unset or unknown"""
    name = os.getenv("GP_LOG_LEVEL", "INFO").strip().upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.INFO


def setup_logger(name: str, level: Optional[int] = None) -> logging.Logger:
    """Set up and return a logger instance writing to stderr"""
    logger = logging.getLogger(name)

    if level is None:
        level = _level_from_env()

    if not logger.handlers:
        # stdout is reserved for the CLI summary line
        handler = logging.StreamHandler(sys.stderr)
        formatter = logging.Formatter(
            '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )
        handler.setFormatter(formatter)
        logger.addHandler(handler)
        logger.setLevel(level)
        logger.propagate = False

    return logger
