import logging

import pytest

from app.core.config import Settings
from app.core.constants import iter_key_values, load_seed_constants, parse_key_value
from app.core.errors import DataFormatError, EXIT_CYCLE_LIMIT, CycleLimitError, UsageError
from app.core.logging_config import configure_logging
from app.schemas.run_config import BundlingMode, RunConfig


def test_settings_defaults():
    s = Settings(_env_file=None)
    assert (s.dim, s.fold, s.am_rows) == (2048, 1, 32)
    assert s.interrupt_policy == "auto_ack"
    assert s.ema_half_life_hours == 5.0


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("HDC_DIM", "8192")
    monkeypatch.setenv("HDC_WORKERS", "4")
    s = Settings(_env_file=None)
    assert s.dim == 8192
    assert s.workers == 4


def test_settings_reject_bad_policy(monkeypatch):
    monkeypatch.setenv("HDC_INTERRUPT_POLICY", "ignore")
    with pytest.raises(ValueError):
        Settings(_env_file=None)


def test_key_value_parsing_skips_comments_and_blanks():
    text = "# header\n\nversion = 3  # trailing\nseed_vector=5\n"
    assert parse_key_value(text, "mem") == {"version": "3", "seed_vector": "5"}
    assert [lineno for lineno, _, _ in iter_key_values(text, "mem")] == [3, 4]


def test_key_value_malformed_line_reports_line_number():
    with pytest.raises(DataFormatError) as info:
        list(iter_key_values("a=1\nnot a pair\n", "cfg.txt"))
    assert info.value.line == 2


def test_default_seed_constants_load(constants):
    assert constants.version == 1
    assert constants.pi0 != constants.pi1


def test_seed_file_missing_key(tmp_path):
    path = tmp_path / "seeds.txt"
    path.write_text("version=1\nseed_vector=1\npi0=2\npi1=3\n")
    with pytest.raises(DataFormatError, match="manipulator"):
        load_seed_constants(path)


def test_seed_file_non_integer(tmp_path):
    path = tmp_path / "seeds.txt"
    path.write_text("version=1\nseed_vector=x\npi0=2\npi1=3\nmanipulator=4\n")
    with pytest.raises(DataFormatError, match="seed_vector"):
        load_seed_constants(path)


def test_seed_file_accepts_hex(tmp_path):
    path = tmp_path / "seeds.txt"
    path.write_text("version=2\nseed_vector=0x10\npi0=2\npi1=3\nmanipulator=4\n")
    assert load_seed_constants(path).seed_vector == 16


def test_run_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d=4096\nseed=9\nbundling=counter\n")
    base = Settings(_env_file=None)
    config = RunConfig.resolve({"seed": 3, "k": None}, cfg, base)
    assert config.d == 4096
    assert config.seed == 3
    assert config.k == 1
    assert config.bundling is BundlingMode.COUNTER


def test_run_config_unknown_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("d=2048\ncolour=blue\n")
    with pytest.raises(DataFormatError) as info:
        RunConfig.resolve({}, cfg, Settings(_env_file=None))
    assert info.value.line == 2


def test_run_config_geometry_violation_is_usage_error():
    with pytest.raises(UsageError):
        RunConfig.resolve({"d": 2048, "k": 3}, None, Settings(_env_file=None))


def test_run_config_geometry_property():
    config = RunConfig(d=1024, k=2, am_rows=16)
    assert config.geometry.width == 512


def test_cycle_limit_has_distinct_exit_code():
    assert CycleLimitError("x").exit_code == EXIT_CYCLE_LIMIT
    assert UsageError("x").exit_code == 1


def test_configure_logging_installs_single_handler(reset_app_logger):
    configure_logging("debug", deterministic=True)
    configure_logging("warning", deterministic=True)
    logger = logging.getLogger("app")
    assert len(logger.handlers) == 1
    assert logger.level == logging.WARNING
    assert "asctime" not in logger.handlers[0].formatter._fmt
