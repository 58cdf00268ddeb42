"""Sanity check library."""

import logging
from collections.abc import Callable
from configparser import ConfigParser, Error
from typing import Any, NamedTuple

logger = logging.getLogger(__name__)

COMMANDS = ("spectrum", "robustness", "thermal", "time-resolved")
PHYSICS_SECTIONS = ("nv", "field", "drive", "collapse", "readout", "sweep")
REQUIRED_SECTIONS: dict[str, tuple[str, ...]] = {
    "spectrum": ("scenario", *PHYSICS_SECTIONS),
    "robustness": ("scenario", *PHYSICS_SECTIONS, "robustness"),
    "thermal": ("scenario", "thermal"),
    "time-resolved": ("scenario", *PHYSICS_SECTIONS, "timing", "thermal"),
}


class Rule(NamedTuple):
    """How one option is converted and which values it accepts."""

    kind: str
    accept: Callable[[Any], bool] | None = None
    expected: str = ""


def positive(x) -> bool:
    """Strictly positive."""
    return x > 0


def non_negative(x) -> bool:
    """Zero or positive."""
    return x >= 0


def one_of(*choices: str) -> Callable[[Any], bool]:
    """Accept only the listed `choices`."""
    return lambda x: x in choices


def optional_positive(x) -> bool:
    """Unset or strictly positive."""
    return x is None or x > 0


SCHEMA: dict[str, dict[str, Rule]] = {
    "scenario": {
        "name": Rule("str"),
        "command": Rule("str", one_of(*COMMANDS), f"one of {', '.join(COMMANDS)}"),
        "output_dir": Rule("str"),
        "seed": Rule("int", non_negative, ">= 0"),
        "threads": Rule("int", positive, "> 0"),
    },
    "nv": {
        "D0": Rule("float", positive, "> 0"),
        "dD_dT": Rule("float", lambda x: x != 0, "!= 0"),
        "gamma_e": Rule("float", positive, "> 0"),
        "E": Rule("float", non_negative, ">= 0"),
    },
    "field": {
        "B_mag": Rule("float", non_negative, ">= 0"),
        "theta_deg": Rule("float", lambda x: 0 <= x <= 90, "in [0, 90]"),
        "dB_list": Rule("floatlist"),
    },
    "drive": {
        "Omega": Rule("float", positive, "> 0"),
    },
    "collapse": {
        "Gamma_gl": Rule("float", positive, "> 0"),
    },
    "readout": {
        "R_base": Rule("float", positive, "> 0"),
        "C_max": Rule("float", lambda x: 0 < x < 1, "in (0, 1)"),
    },
    "sweep": {
        "points": Rule("int", lambda x: x >= 7, ">= 7"),
        "span_linewidths": Rule("float", positive, "> 0"),
        "linewidth_guess": Rule("optfloat", optional_positive, "> 0 or empty"),
        "single_tone": Rule("bool"),
    },
    "robustness": {
        "B_min": Rule("float", positive, "> 0"),
        "B_max": Rule("float", positive, "> 0"),
        "B_points": Rule("int", positive, "> 0"),
        "theta_min_deg": Rule("float", lambda x: 0 <= x <= 90, "in [0, 90]"),
        "theta_max_deg": Rule("float", lambda x: 0 <= x <= 90, "in [0, 90]"),
        "theta_points": Rule("int", positive, "> 0"),
        "h": Rule("float", positive, "> 0"),
        "linewidth": Rule("optfloat", optional_positive, "> 0 or empty"),
        "extraction": Rule(
            "str", one_of("three_point", "fit"), "one of three_point, fit"
        ),
        "detuning_model": Rule(
            "str", one_of("linear", "exact"), "one of linear, exact"
        ),
        "scan_dB": Rule("floatlist"),
        "map": Rule("bool"),
    },
    "timing": {
        "cycle": Rule("float", positive, "> 0"),
        "slot": Rule("float", positive, "> 0"),
        "bin_ns": Rule("float", positive, "> 0"),
        "dead": Rule("float", non_negative, ">= 0"),
        "heat_offset": Rule("float", non_negative, ">= 0"),
        "heat_duration": Rule("float", non_negative, ">= 0"),
        "heat_period": Rule("float", positive, "> 0"),
        "box": Rule("int", positive, "> 0"),
        "n": Rule("int", positive, "> 0"),
        "cycles": Rule("int", positive, "> 0"),
        "unstable_sigma": Rule("float", non_negative, ">= 0"),
        "d_omega": Rule("float", positive, "> 0"),
        "noiseless": Rule("bool"),
        "write_stream": Rule("bool"),
    },
    "thermal": {
        "model": Rule("str", one_of("simulate", "analytic"), "one of simulate, analytic"),
        "source_map": Rule("str"),
        "width_um": Rule("float", positive, "> 0"),
        "height_um": Rule("float", positive, "> 0"),
        "strip_width_um": Rule("float", positive, "> 0"),
        "strip_cells": Rule("int", positive, "> 0"),
        "air_cells": Rule("int", positive, "> 0"),
        "ny": Rule("int", positive, "> 0"),
        "grading": Rule("float", lambda x: x >= 1, ">= 1"),
        "thickness": Rule("float", positive, "> 0"),
        "h_convection": Rule("float", non_negative, ">= 0"),
        "h_convection_air": Rule("float", non_negative, ">= 0"),
        "T_inf": Rule("float"),
        "T0": Rule("float"),
        "power": Rule("float", non_negative, ">= 0"),
        "heated_length_um": Rule("float", positive, "> 0"),
        "pulse_start": Rule("float", non_negative, ">= 0"),
        "pulse_duration": Rule("float", non_negative, ">= 0"),
        "pulse_period": Rule("float", positive, "> 0"),
        "t_end": Rule("float", positive, "> 0"),
        "output_interval": Rule("float", positive, "> 0"),
        "probes": Rule("points", lambda x: len(x) > 0, "at least one x:y point"),
        "snapshots": Rule("floatlist"),
        "gzip": Rule("bool"),
        "amplitude": Rule("float"),
        "tau_rise": Rule("float", non_negative, ">= 0"),
        "tau_fall": Rule("float", non_negative, ">= 0"),
    },
}


def convert(cfg: ConfigParser, section: str, key: str, kind: str):
    """Read `section.key` from `cfg` with the converter named by `kind`.

    Raises
    ------
    ValueError
        If the stored text cannot be converted.

    """
    if kind == "str":
        return cfg.get(section, key)
    if kind == "int":
        return cfg.getint(section, key)
    if kind == "float":
        return cfg.getfloat(section, key)
    if kind == "optfloat":
        return cfg.getfloat(section, key) if cfg.get(section, key).strip() else None
    if kind == "bool":
        return cfg.getboolean(section, key)
    if kind == "floatlist":
        return cfg.getfloatlist(section, key)  # type: ignore[attr-defined]
    if kind == "points":
        return cfg.getpoints(section, key)  # type: ignore[attr-defined]
    raise ValueError(f"unknown option kind {kind}")


def config_diagnostics(cfg: ConfigParser, command: str | None = None) -> list[str]:
    """List every problem found in a scenario as `section.key: message`.

    Parameters
    ----------
    cfg : ConfigParser
        Scenario as written in the file, without defaults.
    command : str | None
        Command the scenario is run with. `None` uses `scenario.command`.

    Returns
    -------
    list[str]
        Diagnostics, empty when the scenario is valid.

    """
    diagnostics = []

    for section in cfg.sections():
        if section not in SCHEMA:
            diagnostics.append(f"{section}: unknown section")
            continue
        for key in cfg[section]:
            if key not in SCHEMA[section]:
                diagnostics.append(f"{section}.{key}: unknown key")

    if command is None and cfg.has_option("scenario", "command"):
        command = cfg.get("scenario", "command")
    if command not in REQUIRED_SECTIONS:
        command = None

    required = REQUIRED_SECTIONS[command] if command is not None else ("scenario",)
    for section in required:
        for key in SCHEMA[section]:
            if not cfg.has_option(section, key):
                diagnostics.append(f"{section}.{key}: missing")

    for section in cfg.sections():
        for key, rule in SCHEMA.get(section, {}).items():
            if not cfg.has_option(section, key):
                continue
            raw = cfg.get(section, key)
            try:
                value = convert(cfg, section, key, rule.kind)
            except ValueError:
                diagnostics.append(
                    f"{section}.{key}: cannot read {raw!r} as {rule.kind}"
                )
                continue
            if rule.accept is not None and not rule.accept(value):
                diagnostics.append(f"{section}.{key}: expected {rule.expected}, got {raw}")

    diagnostics.extend(cross_diagnostics(cfg))
    return diagnostics


def cross_diagnostics(cfg: ConfigParser) -> list[str]:
    """Constraints that involve more than one option."""
    diagnostics = []

    def number(section: str, key: str) -> float | None:
        try:
            return cfg.getfloat(section, key)
        except (ValueError, Error):
            return None

    pairs = [
        ("robustness", "B_min", "B_max"),
        ("robustness", "theta_min_deg", "theta_max_deg"),
    ]
    for section, lo, hi in pairs:
        a, b = number(section, lo), number(section, hi)
        if a is not None and b is not None and a > b:
            diagnostics.append(f"{section}.{hi}: must not be below {section}.{lo}")

    slot, cycle = number("timing", "slot"), number("timing", "cycle")
    if slot is not None and cycle is not None and abs(6 * slot - cycle) > 1e-9:
        diagnostics.append("timing.cycle: must equal 6 * timing.slot")
    dead = number("timing", "dead")
    if slot is not None and dead is not None and dead >= slot:
        diagnostics.append("timing.dead: must be below timing.slot")

    duration, period = (
        number("thermal", "pulse_duration"),
        number("thermal", "pulse_period"),
    )
    if duration is not None and period is not None and duration > period:
        diagnostics.append("thermal.pulse_duration: must not exceed thermal.pulse_period")

    return diagnostics


def validate_config(config_path: str, command: str | None = None) -> ConfigParser:
    """Load a scenario, validate it and overlay it on the defaults.

    Parameters
    ----------
    config_path : str
        Path to the scenario file
    command : str | None
        Command the scenario is run with.

    Returns
    -------
    ConfigParser
        Defaults overlaid with the scenario.

    Raises
    ------
    ConfigError
        With every diagnostic found.

    """
    from lib.cfg import load_config, parse_config
    from lib.errors import ConfigError

    diagnostics = config_diagnostics(parse_config(config_path), command)
    if diagnostics:
        raise ConfigError(diagnostics)

    return load_config(config_path)


def check_config(config_path: str, command: str | None = None) -> bool:
    """Check if configuration file has valid values.

    Parameters
    ----------
    config_path : str
        Path to the configuration file
    command : str | None
        Command the scenario is meant for.

    Returns
    -------
    bool
        Return `True` is configuration is valid else `False`

    """
    from lib.errors import ConfigError

    logger.info(f"Checking your scenario file {config_path}...")
    try:
        validate_config(config_path, command)
    except ConfigError as e:
        for diagnostic in e.diagnostics:
            logger.error(diagnostic)
        logger.error("🛑 Error(s) encountered... Please fix them before running.")
        return False

    logger.info("✅ Everything seems fine!")
    return True
