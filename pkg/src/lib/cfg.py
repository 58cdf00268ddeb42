"""Configuration file library."""

import logging
import os
from configparser import ConfigParser

logger = logging.getLogger(__name__)


def convert_to_list(x: str) -> list[str]:
    """Convert an element from ConfigParser to a list.

    Parameters
    ----------
    x : str
        Element to be converted to a list.

    Returns
    -------
    list[str]
        Converted list.

    """
    if x.strip():
        return [s.strip() for s in x.split(",")]
    else:
        return []


def convert_to_floatlist(x: str) -> list[float]:
    """Convert a comma-separated element from ConfigParser to floats.

    Parameters
    ----------
    x : str
        Element to be converted.

    Returns
    -------
    list[float]
        Converted list.

    """
    return [float(s) for s in convert_to_list(x)]


def convert_to_points(x: str) -> list[tuple[float, float]]:
    """Convert `x:y, x:y` pairs from ConfigParser to tuples.

    Parameters
    ----------
    x : str
        Element to be converted.

    Returns
    -------
    list[tuple[float, float]]
        Converted pairs.

    """
    points = []
    for item in convert_to_list(x):
        a, _, b = item.partition(":")
        points.append((float(a), float(b)))
    return points


def default_config() -> ConfigParser:
    """Get default configuration.

    Returns
    -------
    ConfigParser
        Every section with its default values.

    """
    config = make_parser()
    config["scenario"] = {
        "name": "default",
        "command": "spectrum",
        "output_dir": "results",
        "seed": "0",
        "threads": "1",
    }
    config["nv"] = {
        "D0": "2870.0",
        "dD_dT": "-0.074",
        "gamma_e": "2.8",
        "E": "0.0",
    }
    config["field"] = {
        "B_mag": "47.0",
        "theta_deg": "10.0",
        "dB_list": "",
    }
    config["drive"] = {
        "Omega": "0.95",
    }
    config["collapse"] = {
        "Gamma_gl": "10.0",
    }
    config["readout"] = {
        "R_base": "1e6",
        "C_max": "0.3",
    }
    config["sweep"] = {
        "points": "121",
        "span_linewidths": "3.0",
        "linewidth_guess": "",
        "single_tone": "False",
    }
    config["robustness"] = {
        "B_min": "20.0",
        "B_max": "200.0",
        "B_points": "8",
        "theta_min_deg": "0.0",
        "theta_max_deg": "45.0",
        "theta_points": "8",
        "h": "0.2",
        "linewidth": "",
        "extraction": "three_point",
        "detuning_model": "linear",
        "scan_dB": "-2, -1, -0.5, 0, 0.5, 1, 2",
        "map": "True",
    }
    config["timing"] = {
        "cycle": "60.0",
        "slot": "10.0",
        "bin_ns": "16.0",
        "dead": "4.0",
        "heat_offset": "5.0",
        "heat_duration": "3.0",
        "heat_period": "10.0",
        "box": "3",
        "n": "100000",
        "cycles": "1",
        "unstable_sigma": "3.0",
        "d_omega": "1.0",
        "noiseless": "False",
        "write_stream": "False",
    }
    config["thermal"] = {
        "model": "analytic",
        "source_map": "",
        "width_um": "60.0",
        "height_um": "40.0",
        "strip_width_um": "10.0",
        "strip_cells": "10",
        "air_cells": "8",
        "ny": "40",
        "grading": "1.3",
        "thickness": "500e-9",
        "h_convection": "2e8",
        "h_convection_air": "0.0",
        "T_inf": "26.0",
        "T0": "26.0",
        "power": "5e7",
        "heated_length_um": "10.0",
        "pulse_start": "0.0",
        "pulse_duration": "3.0",
        "pulse_period": "10.0",
        "t_end": "10.0",
        "output_interval": "0.016",
        "probes": "0:5, 0:15, 0:25",
        "snapshots": "3.0",
        "gzip": "False",
        "amplitude": "5.0",
        "tau_rise": "0.0",
        "tau_fall": "0.0",
    }

    return config


def write_config(cfg: ConfigParser, path: str):
    """Write a configuration `cfg` into a file in `path`.

    Parameters
    ----------
    cfg : ConfigParser
        Configuration instance
    path : str
        Path to write the configuration file

    """
    expand_path = os.path.abspath(os.path.expanduser(path))
    parent_dir = os.path.dirname(expand_path)
    if not os.path.exists(parent_dir):
        os.makedirs(parent_dir, exist_ok=True)

    with open(expand_path, "w") as f:
        cfg.write(f)
        logger.debug(f"Configuration file {path} updated")


def make_parser() -> ConfigParser:
    """ConfigParser with the `list`, `floatlist` and `points` converters.

    Option names keep their case, `D0` and `d0` are different keys.
    """
    parser = ConfigParser(
        converters={
            "list": convert_to_list,
            "floatlist": convert_to_floatlist,
            "points": convert_to_points,
        }
    )
    parser.optionxform = str  # type: ignore[assignment]
    return parser


def parse_config(path: str) -> ConfigParser:
    """Read a scenario file as is.

    Parameters
    ----------
    path : str
        Path to the configuration file

    Returns
    -------
    ConfigParser
        Values contained in the file.

    Raises
    ------
    ConfigError
        If the file does not exist or cannot be parsed.

    """
    from configparser import Error

    from lib.errors import ConfigError

    expand_path = os.path.expanduser(path)
    if not os.path.exists(expand_path):
        raise ConfigError([f"{path}: file not found"])

    logger.debug(f"Loading configuration from {path}")
    user_config = make_parser()
    try:
        user_config.read(expand_path)
    except Error as e:
        raise ConfigError([f"{path}: {e}"]) from e

    return user_config


def load_config(path: str) -> ConfigParser:
    """Defaults overlaid with the values of the scenario file `path`."""
    cfg = make_parser()
    cfg.read_dict(default_config())
    cfg.read_dict(parse_config(path))
    return cfg


def config_as_dict(cfg: ConfigParser) -> dict[str, dict[str, str]]:
    """Plain nested dictionary of every section."""
    return {section: dict(cfg[section]) for section in cfg.sections()}


def print_config(cfg: ConfigParser):
    """Print the current configuration `cfg`.

    Parameters
    ----------
    cfg : ConfigParser
        Configuration instance to print

    """
    for section in cfg.sections():
        print(f"[{section}]")
        for key, value in cfg[section].items():
            print(f"{key} = {value}")

        print()
