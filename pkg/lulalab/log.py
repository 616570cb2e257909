"""The package logger; modules import it as ``from .log import default_logger as logger``."""
# Internal
from . import settings
from .utils.loggers import DefaultLogger

# Configured lazily: the log file is only created by the first message.
default_logger = DefaultLogger(
    logger_name=settings.LOGGER_NAME,
    log_file=settings.LOG_FILE,
    level=settings.LOG_LEVEL,
    log_size=settings.LOG_SIZE,
    logger_format=settings.LOGGER_FORMAT,
)
