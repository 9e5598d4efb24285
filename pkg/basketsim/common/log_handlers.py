"""
Log Handlers

This module contains utility functions to set up logging
consistently
"""
import logging

from basketsim import config

LOG_FORMAT = "[%(asctime)s] [%(levelname)s] [%(module)s] %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S %z"


def _formatter() -> logging.Formatter:
    return logging.Formatter(LOG_FORMAT, DATE_FORMAT)


def init_logging(logger_name: str = "basketsim", level: int = config.LOGGING_LEVEL) -> logging.Logger:
    """Set up logging for the command line; calling it again replaces the handler"""
    logger = logging.getLogger(logger_name)
    logger.propagate = False
    handler = logging.StreamHandler()
    handler.setFormatter(_formatter())
    logger.handlers = [handler]
    logger.setLevel(level)
    return logger


def init_app_logging(app, logger_name: str):
    """Set up logging for production"""
    app.logger.propagate = False
    gunicorn_logger = logging.getLogger(logger_name)
    app.logger.handlers = gunicorn_logger.handlers
    app.logger.setLevel(gunicorn_logger.level)
    # the estimators log under "basketsim"; send them to the same place
    library_logger = logging.getLogger("basketsim")
    library_logger.propagate = False
    library_logger.handlers = gunicorn_logger.handlers
    library_logger.setLevel(gunicorn_logger.level)
    # Make all log formats consistent
    formatter = _formatter()
    for handler in app.logger.handlers:
        handler.setFormatter(formatter)
    app.logger.info("Logging handler established")
