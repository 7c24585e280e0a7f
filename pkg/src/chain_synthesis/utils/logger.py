import logging
import sys
from typing import Optional, TextIO, Union

LOGGER_NAME = "chain_synthesis"
LOG_FORMAT = (
    "[%(levelname)s][%(asctime)s][%(module)s:%(funcName)s:%(lineno)d] %(message)s"
)


def get_logger() -> logging.Logger:
    """
    Get logger with `NullHandler` by default

    Returns:
        logging.Logger: logger
    """
    logger = logging.getLogger(LOGGER_NAME)
    if not logger.hasHandlers():
        logger.addHandler(logging.NullHandler())
    return logger


def get_logger_with_basic_config(
    level: Union[int, str] = logging.DEBUG, stream: Optional[TextIO] = None
) -> logging.Logger:
    """
    Get logger with basic configuration :
    * `StreamHandler` on `stream` (`stdout` when omitted)
    * Level = `DEBUG`
    * Formatter = `[%(levelname)s][%(asctime)s][%(module)s:%(funcName)s:%(lineno)d] %(message)s`

    The command line passes `sys.stderr` so that reports printed on `stdout`
    are not interleaved with log lines.

    Args:
        level (Union[int, str], optional): Log level. Defaults to `logging.DEBUG`.
        stream (Optional[TextIO], optional): Target stream. Defaults to `sys.stdout`.

    Returns:
        logging.Logger: logger with basic configuration
    """
    logger = get_logger()
    logger.setLevel(level)

    stream_handler = logging.StreamHandler(stream if stream is not None else sys.stdout)
    stream_handler.setLevel(level)
    stream_handler.setFormatter(logging.Formatter(LOG_FORMAT))

    logger.addHandler(stream_handler)

    return logger
