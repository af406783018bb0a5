import json
import os

import pytest

from config_manager import DEFAULT_CONFIG_PATH, ConfigManager
from exceptions import ConfigError


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(DEFAULT_CONFIG_PATH.read_text(encoding="utf-8"), encoding="utf-8")
    return path


def _manager(path, tmp_path, **kwargs):
    return ConfigManager(str(path), env_file=str(tmp_path / ".env"), **kwargs)


def test_repository_config_matches_defaults(config_path, tmp_path):
    manager = _manager(config_path, tmp_path)
    assert manager.get_simulation().replications == 10000
    assert manager.get_simulation().master_seed == 2021
    assert manager.get_statistics().confidence_level == 0.95
    assert manager.get_scoring().method == "product"
    assert manager.get_scoring().boulder_tiebreak == ["tops", "zones", "top_attempts", "zone_attempts"]
    assert manager.get_output().format == "json"


def test_missing_file_uses_defaults(tmp_path):
    manager = _manager(tmp_path / "nope.json", tmp_path)
    assert manager.to_dict() == _manager(DEFAULT_CONFIG_PATH, tmp_path).to_dict()


def test_unreadable_file_warns_and_uses_defaults(tmp_path, capsys):
    path = tmp_path / "config.json"
    path.write_text("{not json", encoding="utf-8")
    manager = _manager(path, tmp_path)
    assert "⚠️" in capsys.readouterr().out
    assert manager.get_statistics().bootstrap_resamples == 10000


def test_environment_overrides(config_path, tmp_path, monkeypatch):
    monkeypatch.setenv("CLIMB_SEED", "7")
    monkeypatch.setenv("CLIMB_METHOD", "rank-sum")
    monkeypatch.setenv("CLIMB_FORMAT", "csv")
    manager = _manager(config_path, tmp_path)
    assert manager.get_simulation().master_seed == 7
    assert manager.get_scoring().method == "sum"
    assert manager.get_output().format == "csv"
    assert _manager(config_path, tmp_path, use_env=False).get_simulation().master_seed == 2021


def test_dotenv_file_is_read(config_path, tmp_path, monkeypatch):
    monkeypatch.setattr(os, "environ", os.environ.copy())
    (tmp_path / ".env").write_text("CLIMB_WORKERS=4\n", encoding="utf-8")
    manager = _manager(config_path, tmp_path)
    assert manager.get_simulation().workers == 4


@pytest.mark.parametrize(
    "name, value",
    [("CLIMB_FORMAT", "xml"), ("CLIMB_BOOTSTRAP", "10"), ("CLIMB_REPLICATIONS", "many"), ("CLIMB_METHOD", "borda")],
)
def test_invalid_environment_values(config_path, tmp_path, monkeypatch, name, value):
    monkeypatch.setenv(name, value)
    with pytest.raises(ConfigError):
        _manager(config_path, tmp_path)


def test_invalid_file_values(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"statistics": {"confidence_level": 1.5}}), encoding="utf-8")
    with pytest.raises(ConfigError):
        _manager(path, tmp_path)


def test_set_value_saves(config_path, tmp_path):
    manager = _manager(config_path, tmp_path)
    manager.set_value("simulation", "replications", 500)
    assert manager.get_simulation().replications == 500
    saved = json.loads(config_path.read_text(encoding="utf-8"))
    assert saved["simulation"]["replications"] == 500
    assert _manager(config_path, tmp_path).get_simulation().replications == 500


def test_set_value_rejects_bad_input(config_path, tmp_path):
    manager = _manager(config_path, tmp_path)
    before = config_path.read_text(encoding="utf-8")
    with pytest.raises(ConfigError):
        manager.set_value("simulation", "replications", 0)
    with pytest.raises(ConfigError):
        manager.set_value("simulation", "speed", 1)
    with pytest.raises(ConfigError):
        manager.set_value("plotting", "dpi", 300)
    assert config_path.read_text(encoding="utf-8") == before
    assert manager.get_simulation().replications == 10000


def test_show_config(config_path, tmp_path, capsys):
    _manager(config_path, tmp_path).show_config()
    out = capsys.readouterr().out
    assert "=" * 60 in out
    assert "master_seed: 2021" in out
