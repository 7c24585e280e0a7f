import io
import logging

import pytest

from chain_synthesis.utils.logger import (
    LOGGER_NAME,
    get_logger,
    get_logger_with_basic_config,
)


@pytest.fixture
def fresh_logger():
    # We need to disable propagation
    # so that we don't have the properties
    # like the list of handlers of the parent
    logger = logging.getLogger(LOGGER_NAME)
    saved_handlers = list(logger.handlers)
    saved_level = logger.level
    logger.propagate = False
    logger.handlers.clear()
    yield logger
    logger.handlers[:] = saved_handlers
    logger.setLevel(saved_level)
    logger.propagate = True


def test_get_logger(fresh_logger):
    logger = get_logger()
    assert logger.name == "chain_synthesis"
    assert logger.hasHandlers()
    assert len(logger.handlers) == 1
    assert isinstance(logger.handlers[0], logging.NullHandler)


def test_get_logger_with_basic_config(fresh_logger):
    get_logger()

    logger = get_logger_with_basic_config()
    assert len(logger.handlers) == 2

    handler_class_list = [handler.__class__ for handler in logger.handlers]
    assert logging.StreamHandler in handler_class_list
    assert logging.NullHandler in handler_class_list


def test_get_logger_with_basic_config_stream(fresh_logger):
    stream = io.StringIO()

    logger = get_logger_with_basic_config(logging.INFO, stream)
    logger.debug("hidden")
    logger.info("Stage `synthesize` is done")

    output = stream.getvalue()
    assert "hidden" not in output
    assert output.startswith("[INFO][")
    assert "Stage `synthesize` is done" in output
