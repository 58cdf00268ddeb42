"""Test lib/interactive.py."""

import os

import questionary


def test_is_valid_float():
    """Test `is_valid_float`."""
    from lib.interactive import is_valid_float

    assert is_valid_float("47")
    assert is_valid_float("-0.074")
    assert is_valid_float("1e6")
    assert not is_valid_float("")
    assert not is_valid_float("47 G")


def test_ask_scenario_path(tmp_path, monkeypatch):
    """Test `ask_scenario_path` if it creates the directory and return the right answer."""
    from uuid import uuid4

    from lib.interactive import ask_scenario_path

    dir_cfg_path = tmp_path / f"{uuid4().hex}"
    cfg_path = dir_cfg_path / "scenario.cfg"
    assert not dir_cfg_path.exists()

    monkeypatch.setattr("questionary.Question.ask", lambda _: str(cfg_path))
    result = ask_scenario_path()

    assert result == str(cfg_path)
    assert dir_cfg_path.exists()


def test_ask_overwrite_config(tmp_path, monkeypatch):
    """Test `ask_overwrite_config`."""
    from lib.interactive import ask_overwrite_config

    monkeypatch.setattr(questionary.Question, "ask", lambda _: False)
    assert ask_overwrite_config(str(tmp_path)) is False


def test_ask_and_update_command(monkeypatch):
    """Test `ask_and_update_command`."""
    from lib.cfg import default_config
    from lib.interactive import ask_and_update_command

    answers = iter(["robustness", "map47", "results/map47"])
    monkeypatch.setattr("questionary.Question.ask", lambda _: next(answers))

    cfg = default_config()
    assert ask_and_update_command(cfg) == "robustness"
    assert dict(cfg["scenario"]) == {
        "name": "map47",
        "command": "robustness",
        "output_dir": "results/map47",
        "seed": "0",
        "threads": "1",
    }


def test_ask_and_update_field_and_drive(monkeypatch):
    """Test `ask_and_update_field` and `ask_and_update_drive`."""
    from lib.cfg import default_config
    from lib.interactive import ask_and_update_drive, ask_and_update_field

    answers = iter(["60", "25", "1.42"])
    monkeypatch.setattr("questionary.Question.ask", lambda _: next(answers))

    cfg = default_config()
    ask_and_update_field(cfg)
    ask_and_update_drive(cfg)

    assert cfg["field"]["B_mag"] == "60"
    assert cfg["field"]["theta_deg"] == "25"
    assert cfg["drive"]["Omega"] == "1.42"


def test_configure_interactively(tmp_path, monkeypatch):
    """Test `configure_interactively` writes a scenario that passes the checks."""
    from lib.check import check_config
    from lib.interactive import configure_interactively

    cfg_path = str(tmp_path / "scenario.cfg")
    answers = iter([cfg_path, "time-resolved", "trace", "results/trace", "47", "10", "0.95", "simulate"])
    monkeypatch.setattr("questionary.Question.ask", lambda _: next(answers))

    assert configure_interactively() == cfg_path
    assert os.path.exists(cfg_path)
    assert check_config(cfg_path)
    assert "model = simulate" in open(cfg_path).read()


def test_configure_interactively_keeps_file(tmp_path, monkeypatch):
    """Test `configure_interactively` leaves an existing scenario alone when asked to."""
    from lib.interactive import configure_interactively

    cfg_path = tmp_path / "scenario.cfg"
    cfg_path.write_text("[scenario]\n")
    answers = iter([str(cfg_path), False])
    monkeypatch.setattr("questionary.Question.ask", lambda _: next(answers))

    assert configure_interactively() is None
    assert cfg_path.read_text() == "[scenario]\n"
