"""
    Conftest for `chain_synthesis`

    All the fixtures used throughout the tests are grouped here.
"""

import logging
from typing import Callable

import numpy as np
import pytest

from chain_synthesis.core.symplectic import sp2_exp
from chain_synthesis.core.synthesis import random_symplectic
from chain_synthesis.utils.config import Config
from chain_synthesis.utils.logger import get_logger_with_basic_config


@pytest.fixture(scope="session")
def config() -> Config:
    """
    Get config from the `.env` file at the root of the project (optional)

    Returns:
        Config: Config instance
    """
    return Config()


@pytest.fixture(scope="session")
def logger() -> logging.Logger:
    """
    Get `chain_synthesis` Logger with basic config

    Returns:
        logging.Logger: `chain_synthesis` Logger with basic config
    """
    return get_logger_with_basic_config()


@pytest.fixture
def rng() -> np.random.Generator:
    """
    Seeded generator, fresh for every test
    """
    return np.random.default_rng(20241016)


@pytest.fixture
def random_sp2(rng) -> Callable:
    """
    Get a function drawing random 2x2 symplectic matrices

    Example :
    >>> def test_stuff(random_sp2):
    >>>     S = random_sp2(bound=1.0)
    """

    def random_sp2_func(bound: float = 1.0) -> np.ndarray:
        return sp2_exp(*rng.uniform(-bound, bound, 3))

    return random_sp2_func


@pytest.fixture
def random_target(rng) -> Callable:
    """
    Get a function drawing random symplectic targets on a number of cradle modes
    """

    def random_target_func(n_modes: int) -> np.ndarray:
        return random_symplectic(n_modes, rng)

    return random_target_func
