"""Test lib/check.py."""

import pytest


def written(tmp_path, edit=None, name: str = "scenario.cfg") -> str:
    """Default configuration after `edit`, written to `tmp_path`."""
    from lib.cfg import default_config, write_config

    cfg = default_config()
    if edit is not None:
        edit(cfg)
    path = str(tmp_path / name)
    write_config(cfg, path)
    return path


def test_default_config_is_valid():
    """Test `config_diagnostics` accepts the defaults for every command."""
    from lib.cfg import default_config
    from lib.check import COMMANDS, config_diagnostics

    for command in COMMANDS:
        assert config_diagnostics(default_config(), command) == []


def test_missing_key():
    """Test `config_diagnostics` names a missing key of a required section."""
    from lib.cfg import default_config
    from lib.check import config_diagnostics

    cfg = default_config()
    cfg.remove_option("field", "B_mag")

    assert config_diagnostics(cfg, "spectrum") == ["field.B_mag: missing"]
    assert config_diagnostics(cfg, "thermal") == []


def test_missing_section():
    """Test `config_diagnostics` lists every key of a missing section."""
    from lib.cfg import default_config
    from lib.check import SCHEMA, config_diagnostics

    cfg = default_config()
    cfg.remove_section("robustness")

    diagnostics = config_diagnostics(cfg, "robustness")
    assert diagnostics == [f"robustness.{key}: missing" for key in SCHEMA["robustness"]]


def test_unknown_entries():
    """Test `config_diagnostics` flags unknown sections and keys."""
    from lib.cfg import default_config
    from lib.check import config_diagnostics

    cfg = default_config()
    cfg["nv"]["zero_field"] = "2870"
    cfg["laser"] = {"power": "1"}

    diagnostics = config_diagnostics(cfg)
    assert "nv.zero_field: unknown key" in diagnostics
    assert "laser: unknown section" in diagnostics


@pytest.mark.parametrize(
    "section,key,value,message",
    [
        ("field", "theta_deg", "95", "field.theta_deg: expected in [0, 90], got 95"),
        ("scenario", "seed", "abc", "scenario.seed: cannot read 'abc' as int"),
        ("readout", "C_max", "1.0", "readout.C_max: expected in (0, 1), got 1.0"),
        ("nv", "dD_dT", "0", "nv.dD_dT: expected != 0, got 0"),
        ("sweep", "linewidth_guess", "-1", "sweep.linewidth_guess: expected > 0 or empty, got -1"),
        ("robustness", "extraction", "guess", "robustness.extraction: expected one of three_point, fit, got guess"),
        ("scenario", "command", "plot", "scenario.command: expected one of spectrum, robustness, thermal, time-resolved, got plot"),
        ("field", "dB_list", "0, x", "field.dB_list: cannot read '0, x' as floatlist"),
        ("thermal", "probes", "", "thermal.probes: expected at least one x:y point, got "),
    ],
)
def test_out_of_range(section, key, value, message):
    """Test `config_diagnostics` on values outside their accepted range."""
    from lib.cfg import default_config
    from lib.check import config_diagnostics

    cfg = default_config()
    cfg[section][key] = value

    assert message in config_diagnostics(cfg, "spectrum")


def test_cross_diagnostics():
    """Test `cross_diagnostics` on inconsistent pairs of options."""
    from lib.cfg import default_config
    from lib.check import cross_diagnostics

    cfg = default_config()
    assert cross_diagnostics(cfg) == []

    cfg["robustness"]["B_min"] = "300"
    cfg["timing"]["cycle"] = "50"
    cfg["timing"]["dead"] = "10"
    cfg["thermal"]["pulse_duration"] = "12"

    assert cross_diagnostics(cfg) == [
        "robustness.B_max: must not be below robustness.B_min",
        "timing.cycle: must equal 6 * timing.slot",
        "timing.dead: must be below timing.slot",
        "thermal.pulse_duration: must not exceed thermal.pulse_period",
    ]


def test_validate_config(tmp_path):
    """Test `validate_config` raises with every diagnostic at once."""
    from lib.check import validate_config
    from lib.errors import ConfigError

    def edit(cfg):
        cfg["field"]["theta_deg"] = "-1"
        cfg.remove_option("drive", "Omega")

    with pytest.raises(ConfigError) as e:
        validate_config(written(tmp_path, edit), "spectrum")

    assert e.value.diagnostics == [
        "drive.Omega: missing",
        "field.theta_deg: expected in [0, 90], got -1",
    ]


def test_validate_config_overlays_defaults(tmp_path):
    """Test `validate_config` fills sections a thermal scenario does not need."""
    from lib.check import validate_config

    def thermal_only(cfg):
        cfg["scenario"]["command"] = "thermal"
        cfg["scenario"]["seed"] = "1"
        cfg.remove_section("field")

    cfg = validate_config(written(tmp_path, thermal_only))
    assert cfg.getint("scenario", "seed") == 1
    assert cfg.getfloat("field", "B_mag") == 47.0


def test_check_config(tmp_path, caplog):
    """Test `check_config` if it correctly checks configuration file values."""
    from lib.check import check_config

    assert check_config(written(tmp_path))

    def negative_seed(cfg):
        cfg["scenario"]["seed"] = "-1"

    assert not check_config(written(tmp_path, negative_seed, "bad.cfg"))
    assert "scenario.seed: expected >= 0, got -1" in caplog.text

    assert not check_config(str(tmp_path / "absent.cfg"))
