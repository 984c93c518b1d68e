import pytest

from src.core.config import get_settings


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: benchmark-scale instances (deselect with -m 'not slow')")


@pytest.fixture
def output_dir(tmp_path, monkeypatch):
    """Point the process settings at a scratch run directory."""
    monkeypatch.setenv("SFM_OUTPUT_DIR", str(tmp_path / "runs"))
    get_settings.cache_clear()
    yield tmp_path / "runs"
    get_settings.cache_clear()
