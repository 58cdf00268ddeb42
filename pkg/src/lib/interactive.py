"""Interactive asking library."""

import logging
import os
from configparser import ConfigParser

import questionary

logger = logging.getLogger(__name__)


def is_valid_float(text: str) -> bool:
    """Test if `text` can be read as a float.

    Parameters
    ----------
    text : str
        String to test

    Returns
    -------
    bool
        Returns `True` if format is correct, else `False`

    """
    try:
        float(text)
        return True
    except ValueError:
        return False


def ask_scenario_path(default: str = "scenario.cfg") -> str:
    """Ask the user where to store the scenario file. If the parent directory does not exist, we create it.

    Parameters
    ----------
    default : str
        Path proposed to the user

    Returns
    -------
    str
        Path to the scenario file

    """
    cfg_path = questionary.text(
        "Where do you want to store the scenario file?",
        default=default,
    ).ask()
    logger.debug(f"Scenario path: {cfg_path}")

    dir_cfg_path = os.path.expanduser(os.path.dirname(cfg_path))
    if dir_cfg_path and not os.path.exists(dir_cfg_path):
        logger.debug(f"{dir_cfg_path} does not exist, creating it...")
        os.makedirs(dir_cfg_path, exist_ok=True)

    return cfg_path


def ask_overwrite_config(config_path: str) -> bool:
    """Ask the user if they want to overwrite the existing scenario.

    Parameters
    ----------
    config_path : str
        Path to scenario file.

    Returns
    -------
    bool
        `True` if they want to overwrite, else `False`.

    """
    overwrite = questionary.confirm(
        f"{config_path} already exists, do you want to overwrite its content?",
    ).ask()

    return overwrite


def ask_and_update_command(cfg: ConfigParser) -> str:
    """Ask which experiment the scenario runs and update `cfg`.

    Parameters
    ----------
    cfg : ConfigParser
        Configuration instance to update

    Returns
    -------
    str
        Chosen command

    """
    from lib.check import COMMANDS

    command = questionary.select(
        "Which experiment do you want to run?", choices=list(COMMANDS)
    ).ask()
    name = questionary.text("Name of the scenario?", default=command).ask()
    output_dir = questionary.path(
        "Where should the results be written?",
        default=os.path.join("results", name),
        only_directories=True,
    ).ask()

    logger.debug(f"Command: {command}, name: {name}, output: {output_dir}")
    cfg["scenario"]["command"] = command
    cfg["scenario"]["name"] = name
    cfg["scenario"]["output_dir"] = output_dir

    return command


def ask_and_update_field(cfg: ConfigParser) -> None:
    """Ask the magnetic field magnitude and angle and update `cfg`.

    Parameters
    ----------
    cfg : ConfigParser
        Configuration instance to update

    """
    B_mag = questionary.text(
        "Field magnitude |B| (G)?",
        default=cfg["field"]["B_mag"],
        validate=is_valid_float,
    ).ask()
    theta = questionary.text(
        "Angle between the field and the NV axis (degrees)?",
        default=cfg["field"]["theta_deg"],
        validate=is_valid_float,
    ).ask()

    logger.debug(f"Field: {B_mag} G at {theta}°")
    cfg["field"]["B_mag"] = B_mag
    cfg["field"]["theta_deg"] = theta


def ask_and_update_drive(cfg: ConfigParser) -> None:
    """Ask the Rabi frequency of each tone and update `cfg`.

    Parameters
    ----------
    cfg : ConfigParser
        Configuration instance to update

    """
    omega = questionary.text(
        "Rabi frequency Ω of each tone (MHz)?",
        default=cfg["drive"]["Omega"],
        validate=is_valid_float,
    ).ask()

    logger.debug(f"Rabi frequency: {omega} MHz")
    cfg["drive"]["Omega"] = omega


def ask_and_update_thermal_model(cfg: ConfigParser) -> None:
    """Ask how the temperature profile is produced and update `cfg`.

    Parameters
    ----------
    cfg : ConfigParser
        Configuration instance to update

    """
    model = questionary.select(
        "How should the heating profile be produced?",
        choices=["analytic", "simulate"],
    ).ask()

    logger.debug(f"Thermal model: {model}")
    cfg["thermal"]["model"] = model


def configure_interactively(default_path: str = "scenario.cfg") -> str | None:
    """Interactively write a scenario file with the user.

    Parameters
    ----------
    default_path : str
        Path proposed for the scenario

    Returns
    -------
    str | None
        Path written, `None` if the user kept an existing file.

    """
    from lib.cfg import default_config, print_config, write_config

    cfg = default_config()

    print("I am going to ask you some questions to set up a thermometry scenario.\n")

    cfg_path = ask_scenario_path(default_path)
    if os.path.exists(os.path.expanduser(cfg_path)) and not ask_overwrite_config(
        cfg_path
    ):
        return None

    command = ask_and_update_command(cfg)
    if command != "thermal":
        ask_and_update_field(cfg)
        ask_and_update_drive(cfg)
    if command in ("thermal", "time-resolved"):
        ask_and_update_thermal_model(cfg)

    write_config(cfg, cfg_path)

    print(f"\nThis is your scenario stored in {cfg_path}\n")
    print_config(cfg)

    return cfg_path
