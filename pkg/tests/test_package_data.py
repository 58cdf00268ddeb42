"""Test package-data directories."""

SCENARIOS = (
    "fig2b_sweep",
    "fig2c_line",
    "fig2d_map",
    "fig4_thermal",
    "fig3e_timeresolved",
)


def test_scenarios_dir():
    """Test if `dressed_thermo.scenarios` holds every shipped scenario."""
    from importlib.resources import files

    scenarios = files("dressed_thermo.scenarios")
    assert scenarios.is_dir()
    for name in SCENARIOS:
        assert (scenarios / f"{name}.cfg").is_file()


def test_scenarios_are_valid():
    """Test every shipped scenario passes validation for its own command."""
    from importlib.resources import files

    from lib.cfg import parse_config
    from lib.check import config_diagnostics

    for name in SCENARIOS:
        cfg = parse_config(str(files("dressed_thermo.scenarios") / f"{name}.cfg"))
        assert config_diagnostics(cfg) == [], name
