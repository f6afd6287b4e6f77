import logging
from logging.handlers import RotatingFileHandler
from typing import Optional

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def setup_logging(level: str = "INFO", log_file: Optional[str] = None) -> logging.Logger:
    """
    Sets up the package logger used by every service module.

    Safe to call more than once: handlers are only attached the first time,
    later calls just adjust the level.
    """
    logger = logging.getLogger("headwayrl")
    logger.setLevel(level.upper())

    # Avoid adding handlers if they already exist
    if not logger.handlers:
        formatter = logging.Formatter(LOG_FORMAT)

        stream_handler = logging.StreamHandler()
        stream_handler.setFormatter(formatter)
        logger.addHandler(stream_handler)

        if log_file:
            file_handler = RotatingFileHandler(
                log_file,
                maxBytes=1024 * 1024 * 5,  # 5 MB
                backupCount=5
            )
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

        logger.propagate = False

    return logger
