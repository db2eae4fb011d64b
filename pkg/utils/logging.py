"""
Logging configuration and utilities.

Sets up structured JSON logging for the CLI harness and the HTTP service.
Integrates with Sentry for error tracking of long solver runs and the HTTP service.
"""

import logging
import sys
from typing import Optional, TextIO

try:
    from pythonjsonlogger import jsonlogger
except ImportError:
    jsonlogger = None

import sentry_sdk
from sentry_sdk.integrations.flask import FlaskIntegration
from sentry_sdk.integrations.logging import LoggingIntegration

from utils.settings import Settings

SERVICE_NAME = "coc-meanfield"


class JSONFormatter(logging.Formatter):
    """
    JSON formatter for structured logging.

    Falls back to a plain text format if pythonjsonlogger is unavailable.
    """

    def __init__(self, use_json: bool = True, environment: str = "development"):
        """
        Initialize formatter.

        Args:
            use_json: If True, use JSON format; else use standard format
            environment: Value stamped on every JSON record
        """
        self.use_json = use_json and jsonlogger is not None
        self.environment = environment

        if self.use_json:
            super().__init__()
            self.formatter = jsonlogger.JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s")
        else:
            fmt = "%(asctime)s - %(name)s - %(levelname)s - [%(filename)s:%(lineno)d] - %(message)s"
            super().__init__(fmt)

    def format(self, record: logging.LogRecord) -> str:
        if self.use_json:
            record.service = SERVICE_NAME
            record.environment = self.environment
            return self.formatter.format(record)
        return super().format(record)


def setup_logging(
    level: str = None,
    json_format: bool = True,
    sentry_dsn: str = None,
    sentry_env: str = None,
    stream: Optional[TextIO] = None,
) -> logging.Logger:
    """
    Configure logging for the application.

    Sets up:
    - Structured JSON logging to stdout (or the given stream)
    - Logging level, DEBUG in development and INFO elsewhere unless given
    - Sentry integration for error tracking when a DSN is supplied

    Args:
        level: Logging level (DEBUG, INFO, WARNING, ERROR)
        json_format: If True, use JSON format for logs
        sentry_dsn: Sentry DSN for error tracking
        sentry_env: Sentry environment tag
        stream: Output stream; the CLI passes stderr so stdout stays clean

    Returns:
        Configured root logger instance
    """
    environment = sentry_env or "development"
    if level is None:
        level = "DEBUG" if environment == "development" else "INFO"

    log_level = getattr(logging, level.upper(), logging.INFO)

    root_logger = logging.getLogger()
    root_logger.setLevel(log_level)

    # Remove existing handlers to prevent duplicates
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    console_handler = logging.StreamHandler(stream or sys.stdout)
    console_handler.setLevel(log_level)
    console_handler.setFormatter(JSONFormatter(use_json=json_format, environment=environment))
    root_logger.addHandler(console_handler)

    if sentry_dsn:
        sentry_sdk.init(
            dsn=sentry_dsn,
            environment=environment,
            traces_sample_rate=0.1 if environment == "production" else 1.0,
            integrations=[
                FlaskIntegration(),
                LoggingIntegration(
                    level=logging.INFO,  # breadcrumbs
                    event_level=logging.ERROR,  # events
                ),
            ],
        )
        root_logger.info("Sentry error tracking initialized")

    return root_logger


def get_logger(name: str) -> logging.Logger:
    """Get a logger instance for a module (usually ``__name__``)."""
    return logging.getLogger(name)


def init_logging_from_env(settings: Settings = None, stream: Optional[TextIO] = None) -> None:
    """
    Initialize logging configuration from environment settings.
    Called explicitly by the entry points (Flask app, CLI).
    """
    settings = settings or Settings.from_env()
    if settings.is_testing:
        return
    setup_logging(
        level=settings.log_level,
        json_format=True,
        sentry_dsn=settings.sentry_dsn,
        sentry_env=settings.environment,
        stream=stream,
    )
