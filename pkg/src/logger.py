"""
Logger for trace-posets

This module provides structured logging with JSON formatting. All log messages
include timestamp, log level, and message, with support for additional
structured fields. Lines go to stderr so that command results on stdout stay
machine-readable.
"""

import json
import logging
import sys
from datetime import datetime, timezone
from typing import Any, Dict


class Logger:
    """
    Structured logger with JSON formatting.

    Each log entry includes:
    - timestamp: ISO 8601 formatted UTC timestamp
    - level: Log level (DEBUG, INFO, WARNING, ERROR)
    - message: Human-readable message
    - Additional structured fields via kwargs

    Example:
        logger = Logger()
        logger.info("Search finished", kind="tr", n=5, value=8, nodes=12034)
        # Output: {"timestamp": "2026-01-01T12:00:00.000000Z", "level": "INFO",
        #          "message": "Search finished", "kind": "tr", "n": 5, "value": 8, "nodes": 12034}
    """

    def __init__(self, name: str = "trace-posets", level: str = "INFO"):
        """
        Initialize the logger.

        Args:
            name: Logger name (default: "trace-posets")
            level: Minimum level name, e.g. "DEBUG" or "WARNING" (default: "INFO")
        """
        numeric_level = logging.getLevelName(level.upper())
        if not isinstance(numeric_level, int):
            numeric_level = logging.INFO

        self._logger = logging.getLogger(name)
        self._logger.setLevel(numeric_level)
        self._logger.propagate = False

        # Remove any existing handlers to avoid duplicates
        self._logger.handlers.clear()

        handler = logging.StreamHandler(sys.stderr)
        handler.setLevel(numeric_level)

        # Use basic formatter since we format as JSON in our methods
        handler.setFormatter(logging.Formatter('%(message)s'))

        self._logger.addHandler(handler)

    def _format_log(self, level: str, message: str, **kwargs: Any) -> str:
        """
        Format log message as JSON.

        Args:
            level: Log level (DEBUG, INFO, WARNING, ERROR)
            message: Human-readable message
            **kwargs: Additional structured fields

        Returns:
            JSON-formatted log string
        """
        log_entry: Dict[str, Any] = {
            "timestamp": datetime.now(timezone.utc).isoformat().replace("+00:00", "Z"),
            "level": level,
            "message": message
        }

        if kwargs:
            log_entry.update(kwargs)

        # default=str keeps Fractions and Paths loggable
        return json.dumps(log_entry, default=str)

    def debug(self, message: str, **kwargs: Any) -> None:
        """
        Log debug message (search progress, per-branch statistics).

        Example:
            logger.debug("Search progress", nodes=100000, best=7)
        """
        if self._logger.isEnabledFor(logging.DEBUG):
            self._logger.debug(self._format_log("DEBUG", message, **kwargs))

    def info(self, message: str, **kwargs: Any) -> None:
        """
        Log informational message.

        Example:
            logger.info("Starting solve", kind="tr", n=4, poset="butterfly")
        """
        self._logger.info(self._format_log("INFO", message, **kwargs))

    def warning(self, message: str, **kwargs: Any) -> None:
        """
        Log warning message.

        Example:
            logger.warning("Canonical form is heuristic", n=10)
        """
        self._logger.warning(self._format_log("WARNING", message, **kwargs))

    def error(self, message: str, **kwargs: Any) -> None:
        """
        Log error message.

        Example:
            logger.error("Catalog merge failed", error_type="IntegrityError")
        """
        self._logger.error(self._format_log("ERROR", message, **kwargs))
