import pytest
from pydantic import ValidationError

from chain_synthesis.core.schemas import Tolerances
from chain_synthesis.utils.config import Config, ConfigError


def test_Config_reads_prefixed_variables(monkeypatch):
    monkeypatch.setenv("CHAIN_SYNTHESIS_TOL_PLAN", "1e-7")
    monkeypatch.setenv("OTHER_TOOL_TOL_PLAN", "1e-2")

    config = Config()

    assert config.TOL_PLAN == "1e-7"
    assert "OTHER_TOOL_TOL_PLAN" not in config.__dict__
    assert "TOOL_TOL_PLAN" not in config.__dict__


def test_Config_get_with_default(monkeypatch):
    monkeypatch.delenv("CHAIN_SYNTHESIS_RWA_RATIO", raising=False)

    config = Config()

    assert config.get("RWA_RATIO") is None
    assert config.get("RWA_RATIO", "0.02") == "0.02"


def test_Config_field_not_found():
    config = Config()
    try:
        config.THIS_FIELD_DOES_NOT_EXIST
        assert False
    except ConfigError:
        pass


def test_Tolerances_defaults():
    tolerances = Tolerances()

    assert tolerances.tol_sym == 1e-9
    assert tolerances.tol_block == 1e-10
    assert tolerances.tol_plan == 1e-8
    assert tolerances.max_restarts == 32
    assert tolerances.initial_damping == 1e-3
    assert tolerances.rwa_ratio == 0.01


def test_Tolerances_from_config(monkeypatch):
    monkeypatch.setenv("CHAIN_SYNTHESIS_TOL_PLAN", "1e-7")
    monkeypatch.setenv("CHAIN_SYNTHESIS_MAX_RESTARTS", "8")
    monkeypatch.setenv("CHAIN_SYNTHESIS_RWA_RATIO", "0.05")

    tolerances = Tolerances.from_config(Config(), rwa_ratio=0.02, tol_plan=None)

    assert tolerances.tol_plan == 1e-7
    assert tolerances.max_restarts == 8
    # command line overrides win over the environment
    assert tolerances.rwa_ratio == 0.02


def test_Tolerances_rejects_large_rwa_ratio():
    with pytest.raises(ValidationError):
        Tolerances(rwa_ratio=0.5)
