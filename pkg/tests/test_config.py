"""
Tests for the configuration module
"""

import pytest
from pydantic import ValidationError

from scatter_kirchhoff.config import SolverConfig, get_config, load_config, set_config


def test_solver_config_defaults() -> None:
    """Test that SolverConfig carries the documented tolerances"""
    config = SolverConfig()
    assert config.grazing_tol == 1e-6
    assert config.caustic_tol == 1e-6
    assert config.newton_max_iter == 100
    assert config.newton_tol == 1e-10
    assert config.dedup_tol == 1e-6
    assert config.mie_tail_tol == 1e-12


def test_load_config_with_env_var(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that load_config respects SCATTER_* environment variables"""
    monkeypatch.setenv('SCATTER_MULTISTART', '12')
    monkeypatch.setenv('SCATTER_GRAZING_TOL', '1e-7')
    config = load_config()
    assert config.multistart == 12
    assert config.grazing_tol == 1e-7


def test_load_config_rejects_bad_env(monkeypatch: pytest.MonkeyPatch) -> None:
    """Test that malformed overrides are rejected"""
    monkeypatch.setenv('SCATTER_CHUNK_ROWS', '-5')
    with pytest.raises(ValidationError):
        load_config()


def test_unknown_field_rejected() -> None:
    """Test that typos in config keys fail loudly"""
    with pytest.raises(ValidationError):
        SolverConfig.model_validate({"grazing_tolerance": 1e-3})


def test_get_config_singleton() -> None:
    """Test that get_config returns the same instance"""
    config1 = get_config()
    config2 = get_config()
    assert config1 is config2


def test_set_config_swaps_instance() -> None:
    """Test that set_config installs a new global configuration"""
    original = get_config()
    try:
        custom = SolverConfig(multistart=2)
        assert set_config(custom) is custom
        assert get_config().multistart == 2
    finally:
        set_config(original)
    assert get_config() is original
