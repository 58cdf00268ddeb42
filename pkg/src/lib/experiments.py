"""Experiment drivers behind the command-line subcommands.

Each `cmd_*` function takes a resolved `ExperimentConfig`, writes its data
files under the output directory together with `metadata.json`, and returns
the list of files written.
"""

import logging
import os
from configparser import ConfigParser
from dataclasses import dataclass, field, fields
from math import sqrt
from threading import Event

import numpy as np

from lib.lindblad import CollapseSet, ReadoutModel
from lib.odmr_analysis import SweepConfig, default_sweep
from lib.photon_pipeline import TimingConfig
from lib.spin_model import (
    DriveParams,
    FieldVector,
    NVParams,
    drive_at_resonance,
    field_from_config,
    nv_from_config,
)
from lib.thermal_sim import ThermalGrid

logger = logging.getLogger(__name__)

SCENARIO_PACKAGE = "dressed_thermo.scenarios"


@dataclass(frozen=True)
class SweepSettings:
    """Centre-frequency sweep of the `[sweep]` section."""

    points: int = 121
    span: float = 3.0
    linewidth_guess: float | None = None
    single_tone: bool = False


@dataclass(frozen=True)
class RobustnessSettings:
    """Robustness map and line scan of the `[robustness]` section.

    Attributes
    ----------
    B_grid : tuple[float, ...]
        Field magnitudes of the map (G).
    theta_grid : tuple[float, ...]
        Field angles of the map (rad).
    h : float
        Central-difference step (G).
    linewidth : float | None
        Γ of the three-point formula, fitted when `None`.
    extraction : str
        `three_point` or `fit`.
    exact : bool
        Exact rather than linear detunings.
    scan_dB : tuple[float, ...]
        δ|B| values of the line scan (G).
    compute_map : bool
        Whether the map is computed at all.
    """

    B_grid: tuple[float, ...] = ()
    theta_grid: tuple[float, ...] = ()
    h: float = 0.2
    linewidth: float | None = None
    extraction: str = "three_point"
    exact: bool = False
    scan_dB: tuple[float, ...] = ()
    compute_map: bool = True


@dataclass(frozen=True)
class PipelineSettings:
    """Photon budget and conversion options of the `[timing]` section."""

    n: int = 100_000
    cycles: int = 1
    unstable_sigma: float = 3.0
    d_omega: float = 1.0
    noiseless: bool = False
    write_stream: bool = False


@dataclass(frozen=True)
class ThermalSettings:
    """Gold-strip geometry, heating and recording of the `[thermal]` section."""

    model: str = "analytic"
    source_map: str = ""
    width_um: float = 60.0
    height_um: float = 40.0
    strip_width_um: float = 10.0
    strip_cells: int = 10
    air_cells: int = 8
    ny: int = 40
    grading: float = 1.3
    thickness: float = 500e-9
    h_convection: float = 2e8
    h_convection_air: float = 0.0
    T_inf: float = 26.0
    T0: float = 26.0
    power: float = 5e7
    heated_length_um: float = 10.0
    pulse_start: float = 0.0
    pulse_duration: float = 3.0
    pulse_period: float = 10.0
    t_end: float = 10.0
    output_interval: float = 0.016
    probes: tuple[tuple[float, float], ...] = ((0.0, 20.0),)
    snapshots: tuple[float, ...] = ()
    gzip: bool = False
    amplitude: float = 5.0
    tau_rise: float = 0.0
    tau_fall: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    """A validated scenario with its command-line overrides applied."""

    name: str
    command: str
    output_dir: str
    seed: int
    threads: int
    nv: NVParams
    B: FieldVector
    dB_list: tuple[float, ...]
    drive: DriveParams
    collapse: CollapseSet
    readout: ReadoutModel
    sweep: SweepSettings
    robustness: RobustnessSettings
    timing: TimingConfig
    pipeline: PipelineSettings
    thermal: ThermalSettings
    raw: dict[str, dict[str, str]] = field(default_factory=dict)

    def sweep_config(self) -> SweepConfig:
        """Reference sweep around the resonant drive."""
        return default_sweep(
            self.drive,
            self.collapse,
            self.readout,
            self.sweep.points,
            self.sweep.span,
            self.sweep.linewidth_guess,
        )

    def path(self, name: str) -> str:
        """Location of output file `name`."""
        return os.path.join(self.output_dir, name)


def scenario_path(name_or_path: str) -> str:
    """Resolve a file path, or the name of a scenario shipped with the package.

    Parameters
    ----------
    name_or_path : str
        Existing file, or a packaged scenario such as `fig2b_sweep`.

    Returns
    -------
    str
        Path to read; unchanged when nothing matches.

    """
    from importlib.resources import files

    expand_path = os.path.expanduser(name_or_path)
    if os.path.exists(expand_path):
        return expand_path

    packaged = files(SCENARIO_PACKAGE) / f"{os.path.basename(name_or_path).removesuffix('.cfg')}.cfg"
    if packaged.is_file():
        logger.debug(f"Using packaged scenario {packaged}")
        return str(packaged)

    return expand_path


def experiment_from_config(
    cfg: ConfigParser,
    out_dir: str | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """Build an `ExperimentConfig` from a resolved configuration.

    Parameters
    ----------
    cfg : ConfigParser
        Defaults overlaid with a validated scenario.
    out_dir : str | None
        `--out` override.
    seed : int | None
        `--seed` override.
    threads : int | None
        `--threads` override.

    Returns
    -------
    ExperimentConfig
        The experiment. `cfg` is updated with the overrides so that the
        metadata records what actually ran.

    """
    from lib.cfg import config_as_dict
    from lib.threading import resolve_threads

    if out_dir is not None:
        cfg["scenario"]["output_dir"] = out_dir
    if seed is not None:
        cfg["scenario"]["seed"] = str(seed)
    n_threads = resolve_threads(threads, cfg.getint("scenario", "threads"))
    cfg["scenario"]["threads"] = str(n_threads)

    nv = nv_from_config(cfg)
    B = field_from_config(cfg)

    def optional(section: str, key: str) -> float | None:
        return cfg.getfloat(section, key) if cfg.get(section, key).strip() else None

    r = cfg["robustness"]
    robustness = RobustnessSettings(
        B_grid=tuple(np.linspace(r.getfloat("B_min"), r.getfloat("B_max"), r.getint("B_points"))),
        theta_grid=tuple(
            np.radians(
                np.linspace(
                    r.getfloat("theta_min_deg"),
                    r.getfloat("theta_max_deg"),
                    r.getint("theta_points"),
                )
            )
        ),
        h=r.getfloat("h"),
        linewidth=optional("robustness", "linewidth"),
        extraction=r.get("extraction"),
        exact=r.get("detuning_model") == "exact",
        scan_dB=tuple(cfg.getfloatlist("robustness", "scan_dB")),  # type: ignore[attr-defined]
        compute_map=r.getboolean("map"),
    )

    t = cfg["timing"]
    timing = TimingConfig(
        cycle=t.getfloat("cycle"),
        slot=t.getfloat("slot"),
        bin_ns=t.getfloat("bin_ns"),
        dead=t.getfloat("dead"),
        heat_offset=t.getfloat("heat_offset"),
        heat_duration=t.getfloat("heat_duration"),
        heat_period=t.getfloat("heat_period"),
        box=t.getint("box"),
    )
    pipeline = PipelineSettings(
        n=t.getint("n"),
        cycles=t.getint("cycles"),
        unstable_sigma=t.getfloat("unstable_sigma"),
        d_omega=t.getfloat("d_omega"),
        noiseless=t.getboolean("noiseless"),
        write_stream=t.getboolean("write_stream"),
    )

    th = cfg["thermal"]
    floats = [f.name for f in fields(ThermalSettings) if f.type is float]
    ints = [f.name for f in fields(ThermalSettings) if f.type is int]
    thermal = ThermalSettings(
        model=th.get("model"),
        source_map=th.get("source_map").strip(),
        probes=tuple(cfg.getpoints("thermal", "probes")),  # type: ignore[attr-defined]
        snapshots=tuple(cfg.getfloatlist("thermal", "snapshots")),  # type: ignore[attr-defined]
        gzip=th.getboolean("gzip"),
        **{k: th.getfloat(k) for k in floats},
        **{k: th.getint(k) for k in ints},
    )

    return ExperimentConfig(
        name=cfg.get("scenario", "name"),
        command=cfg.get("scenario", "command"),
        output_dir=os.path.expanduser(cfg.get("scenario", "output_dir")),
        seed=cfg.getint("scenario", "seed"),
        threads=n_threads,
        nv=nv,
        B=B,
        dB_list=tuple(cfg.getfloatlist("field", "dB_list")),  # type: ignore[attr-defined]
        drive=drive_at_resonance(nv, B, cfg.getfloat("drive", "Omega")),
        collapse=CollapseSet(cfg.getfloat("collapse", "Gamma_gl")),
        readout=ReadoutModel(cfg.getfloat("readout", "R_base"), cfg.getfloat("readout", "C_max")),
        sweep=SweepSettings(
            points=cfg.getint("sweep", "points"),
            span=cfg.getfloat("sweep", "span_linewidths"),
            linewidth_guess=optional("sweep", "linewidth_guess"),
            single_tone=cfg.getboolean("sweep", "single_tone"),
        ),
        robustness=robustness,
        timing=timing,
        pipeline=pipeline,
        thermal=thermal,
        raw=config_as_dict(cfg),
    )


def load_experiment(
    config_path: str,
    command: str,
    out_dir: str | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """Validate a scenario file and build its experiment.

    Raises
    ------
    ConfigError
        If the scenario does not pass `lib.check.validate_config`, or if its
        values are rejected by the domain types.

    """
    from lib.check import validate_config
    from lib.errors import ConfigError

    cfg = validate_config(scenario_path(config_path), command)
    try:
        exp = experiment_from_config(cfg, out_dir, seed, threads)
    except ValueError as e:
        raise ConfigError([str(e)]) from e

    logger.info(f"Scenario {exp.name}: {command}, results in {exp.output_dir}")
    return exp


def _finish(exp: ExperimentConfig, written: list[str]) -> list[str]:
    from lib.file import write_metadata

    meta = write_metadata(exp.output_dir, written, exp.seed, exp.raw)
    logger.info(f"Wrote {len(written)} data files and {os.path.basename(meta)}")
    return [*written, meta]


def cmd_spectrum(exp: ExperimentConfig, stop_event: Event | None = None) -> list[str]:
    """DS-ODMR spectrum, its fit, and the δ|B| family of `field.dB_list`.

    Files: `spectrum.csv`, `fit.json`, `family.csv` when `dB_list` is set,
    `single_tone.csv` when `sweep.single_tone` is on.
    """
    from lib.odmr_analysis import (
        field_detuning_family,
        fit_lorentzian,
        power_broadened_width,
        simulate_single_tone_spectrum,
        simulate_spectrum,
        write_family_csv,
        write_fit_json,
        write_spectrum_csv,
    )
    from lib.spin_model import Detunings

    cfg = exp.sweep_config()
    spectrum = simulate_spectrum(
        exp.nv, exp.B, Detunings(), cfg, threads=exp.threads, stop_event=stop_event
    )
    fit = fit_lorentzian(spectrum)
    expected = power_broadened_width(exp.drive.Omega, exp.collapse.Gamma_gl)
    logger.info(
        f"Fitted Γ = {fit.Gamma:.3f} MHz (power-broadened {expected:.3f} MHz), C0 = {fit.C0:.4f}"
    )

    written = [
        write_spectrum_csv(exp.path("spectrum.csv"), spectrum),
        write_fit_json(exp.path("fit.json"), fit),
    ]

    if exp.dB_list:
        family = field_detuning_family(
            exp.nv, exp.B, cfg, exp.dB_list, threads=exp.threads, stop_event=stop_event
        )
        written.append(write_family_csv(exp.path("family.csv"), exp.dB_list, family))

    if exp.sweep.single_tone:
        width = sqrt(exp.collapse.Gamma_gl**2 + 8 * exp.drive.Omega**2)
        frequencies = np.linspace(
            exp.drive.omega1 - exp.sweep.span * width,
            exp.drive.omega1 + exp.sweep.span * width,
            exp.sweep.points,
        )
        single = simulate_single_tone_spectrum(
            exp.nv, exp.B, exp.drive.Omega, exp.collapse, exp.readout, frequencies
        )
        written.append(write_spectrum_csv(exp.path("single_tone.csv"), single))

    return _finish(exp, written)


def cmd_robustness(exp: ExperimentConfig, stop_event: Event | None = None) -> list[str]:
    """Robustness map over (|B|, θ) and the δ|B| line scan at the operating field.

    Files: `robustness_map.csv` and `robustness_summary.json` when the map is
    on, `line_scan.csv` and `line_scan.json` when `scan_dB` is set. The line
    scan summary also holds the slope of f_avg against strain E.
    """
    from lib.file import write_json
    from lib.odmr_analysis import (
        field_line_scan,
        field_robustness_map,
        write_line_scan_csv,
        write_robustness_csv,
    )
    from lib.spin_model import strain_response

    r = exp.robustness
    threshold = abs(exp.nv.dD_dT) * 1e3
    written = []

    if r.compute_map:
        m = field_robustness_map(
            exp.nv,
            exp.drive,
            exp.collapse,
            exp.readout,
            r.B_grid,
            r.theta_grid,
            r.extraction,  # type: ignore[arg-type]
            r.h,
            r.linewidth,
            exp.sweep.points,
            exp.sweep.span,
            r.exact,
            exp.threads,
            stop_event,
        )
        below = m.region_below(threshold)
        logger.info(f"{int(below.sum())} of {below.size} cells below {threshold:.1f} kHz/G")
        written.append(write_robustness_csv(exp.path("robustness_map.csv"), m))
        written.append(
            write_json(
                exp.path("robustness_summary.json"),
                {
                    "threshold_kHz_per_G": threshold,
                    "cells_below": int(below.sum()),
                    "B_span_below": int(below.any(axis=1).sum()),
                    "theta_span_below": int(below.any(axis=0).sum()),
                    "invalid": {f"{i},{j}": why for (i, j), why in sorted(m.reasons.items())},
                    "extraction": m.extraction,
                    "h_G": m.h,
                },
            )
        )

    if r.scan_dB:
        scan = field_line_scan(
            exp.nv, exp.B, exp.sweep_config(), r.scan_dB, r.linewidth, r.h, r.exact, stop_event
        )
        ratio = abs(scan.bare_slope / scan.dressed_slope) if scan.dressed_slope else float("inf")
        low, high = strain_response(exp.nv, exp.B, [exp.nv.E, exp.nv.E + 1.0])
        strain_slope = float(np.mean(high - low))
        logger.info(
            f"Dressed slope {1e3 * scan.dressed_slope:.2f} kHz/G, "
            f"bare slope {scan.bare_slope:.4f} MHz/G, attenuation {ratio:.1f}"
        )
        written.append(write_line_scan_csv(exp.path("line_scan.csv"), scan))
        written.append(
            write_json(
                exp.path("line_scan.json"),
                {
                    "dressed_slope_kHz_per_G": 1e3 * scan.dressed_slope,
                    "bare_slope_MHz_per_G": scan.bare_slope,
                    "attenuation": ratio,
                    "strain_slope_MHz_per_MHz": strain_slope,
                },
            )
        )

    return _finish(exp, written)


def thermal_grid(th: ThermalSettings) -> ThermalGrid:
    """Gold-strip grid with its heat source, from the `[thermal]` settings."""
    from dataclasses import replace

    from lib.thermal_sim import cpw_grid, load_source_map, strip_source

    grid = cpw_grid(
        th.width_um,
        th.height_um,
        th.strip_width_um,
        th.strip_cells,
        th.air_cells,
        th.ny,
        th.grading,
        th.thickness,
        th.h_convection,
        th.h_convection_air,
        th.T0,
        th.T_inf,
    )
    if th.source_map:
        source = load_source_map(os.path.expanduser(th.source_map), grid)
    else:
        half_w = th.strip_width_um * 1e-6 / 2
        mid, half_l = th.height_um * 1e-6 / 2, th.heated_length_um * 1e-6 / 2
        source = strip_source(grid, (-half_w, half_w), (mid - half_l, mid + half_l), th.power, 0)

    return replace(grid, source=source)


def simulate_thermal(th: ThermalSettings, stop_event: Event | None = None):
    """March the strip through `t_end` μs of pulsed heating.

    Returns
    -------
    tuple[ThermalGrid, ThermalRun]
        Initial grid and the march outcome.

    """
    from lib.thermal_sim import SourceSchedule, march

    grid = thermal_grid(th)
    schedule = SourceSchedule(grid.source, th.pulse_start, th.pulse_duration, th.pulse_period)
    probes = [grid.cell_at(x * 1e-6, y * 1e-6) for x, y in th.probes]
    logger.info(f"Thermal march over {th.t_end} μs with {len(probes)} probes")
    return grid, march(
        grid,
        schedule,
        th.t_end,
        probes,
        th.output_interval,
        snapshot_times_us=list(th.snapshots),
        stop_event=stop_event,
    )


def cmd_thermal(exp: ExperimentConfig, stop_event: Event | None = None) -> list[str]:
    """Pulsed heating of the gold strip.

    Files: `traces.csv`, `snapshot_<t>us.csv` per requested time,
    `final.csv`, `source.csv` and `thermal_summary.json`. Snapshots are
    gzip-compressed when `thermal.gzip` is on.
    """
    from lib.file import write_json
    from lib.thermal_sim import (
        heat_balance,
        rise_time,
        save_source_map,
        write_snapshot_csv,
        write_traces_csv,
    )

    th = exp.thermal
    grid, result = simulate_thermal(th, stop_event)
    suffix = ".csv.gz" if th.gzip else ".csv"

    written = [write_traces_csv(exp.path("traces.csv"), result.traces)]
    for t_us, T in result.snapshots:
        written.append(write_snapshot_csv(exp.path(f"snapshot_{t_us:g}us{suffix}"), grid, T))
    written.append(write_snapshot_csv(exp.path(f"final{suffix}"), result.final))
    written.append(save_source_map(exp.path("source.csv"), grid, grid.source))

    rises = {}
    for trace in result.traces:
        key = f"{trace.cell[0]},{trace.cell[1]}"
        try:
            rises[key] = rise_time(
                trace, start_us=th.pulse_start, end_us=th.pulse_start + th.pulse_duration
            )
        except ValueError:
            rises[key] = None

    balance = heat_balance(result.final)
    written.append(
        write_json(
            exp.path("thermal_summary.json"),
            {
                "probes": [list(t.cell) for t in result.traces],
                "peak_C": [float(t.T.max()) for t in result.traces],
                "rise_time_us": rises,
                "source_W": balance.source,
                "loss_W": balance.loss,
            },
        )
    )
    return _finish(exp, written)


def cmd_time_resolved(exp: ExperimentConfig, stop_event: Event | None = None) -> list[str]:
    """Pump-probe temperature traces for every δ|B| of `field.dB_list`.

    The six probe frequencies come from a fit at δ|B| = 0 and stay fixed, as
    in a measurement; each δ|B| uses its own simulated spectrum as the photon
    rate. The step amplitude of each run is compared with the δ|B| = 0 run.

    Files: `trace_dB<±x>.csv` per δ|B|, `stats.json`, and the raw streams when
    `timing.write_stream` is on.
    """
    from lib.file import write_json
    from lib.odmr_analysis import (
        fit_lorentzian,
        simulate_spectrum,
        six_point_frequencies,
        spectrum_response,
    )
    from lib.photon_pipeline import (
        point_integration_time,
        pipeline_stats,
        pulse_profile,
        remove_dead_time,
        stack_by_delay,
        synthesize_stream,
        to_temperature,
        trace_profile,
        write_tag_stream,
        write_trace_csv,
    )
    from lib.spin_model import Detunings, field_detunings

    p, timing, th = exp.pipeline, exp.timing, exp.thermal
    cfg = exp.sweep_config()
    reference = fit_lorentzian(
        simulate_spectrum(exp.nv, exp.B, Detunings(), cfg, threads=exp.threads, stop_event=stop_event)
    )
    six = six_point_frequencies(reference.f_avg, reference.Gamma, p.d_omega)
    logger.info(f"Six-point frequencies: {', '.join(f'{f:.3f}' for f in six.freqs)} MHz")

    if th.model == "simulate":
        _, thermal_run = simulate_thermal(th, stop_event)
        profile = trace_profile(thermal_run.traces[0], th.pulse_start)
    else:
        profile = pulse_profile(th.amplitude, timing.heat_duration, th.tau_rise, th.tau_fall)

    margin = reference.Gamma / 2 + p.d_omega
    dense = SweepConfig(
        np.linspace(six.freqs[0] - margin, six.freqs[-1] + margin, 81),
        cfg.drive,
        cfg.collapse,
        cfg.readout,
    )
    baseline = ((timing.dead - timing.heat_offset) * 1000, -timing.resolution_ns)
    plateau = (timing.heat_duration * 500, timing.heat_duration * 1000)
    integration = point_integration_time(timing, p.n * p.cycles)

    dB_values = list(exp.dB_list) or [0.0]
    if 0.0 not in dB_values:
        dB_values.insert(0, 0.0)

    written = []
    runs = {}
    for dB in dB_values:
        spectrum = simulate_spectrum(
            exp.nv,
            exp.B,
            field_detunings(exp.nv, exp.B, dB),
            dense,
            threads=exp.threads,
            stop_event=stop_event,
        )
        raw = synthesize_stream(
            profile,
            spectrum_response(spectrum),
            six,
            timing,
            p.n,
            exp.seed,
            exp.nv.dD_dT,
            p.cycles,
            p.noiseless,
        )
        if p.write_stream:
            written.append(write_tag_stream(exp.path(f"stream_dB{dB:+g}.txt"), raw))

        trace = to_temperature(
            stack_by_delay(remove_dead_time(raw, timing), timing),
            six,
            exp.nv.dD_dT,
            timing,
            p.unstable_sigma,
        )
        written.append(write_trace_csv(exp.path(f"trace_dB{dB:+g}.csv"), trace))

        try:
            stats = pipeline_stats(trace, baseline, integration, plateau)
            entry = {
                "rms_K": stats.rms,
                "snr": stats.snr,
                "sensitivity_K_per_rtHz": stats.sensitivity,
                "amplitude_K": stats.amplitude,
            }
        except ValueError:
            logger.warning(f"δ|B| = {dB:+g} G: no stable samples in the statistics windows")
            entry = {
                "rms_K": None,
                "snr": None,
                "sensitivity_K_per_rtHz": None,
                "amplitude_K": None,
            }
        entry["unstable_fraction"] = trace.unstable_fraction
        runs[dB] = entry
        logger.info(
            f"δ|B| = {dB:+g} G: amplitude {entry['amplitude_K']}, "
            f"unstable fraction {trace.unstable_fraction:.3f}"
        )

    zero = runs[0.0]["amplitude_K"]
    for entry in runs.values():
        a = entry["amplitude_K"]
        entry["eps_sys_K"] = None if a is None or zero is None else a - zero

    written.append(
        write_json(
            exp.path("stats.json"),
            {
                "reference_fit": {
                    "f_avg_MHz": reference.f_avg,
                    "Gamma_MHz": reference.Gamma,
                    "C0": reference.C0,
                },
                "six_point_MHz": list(six.freqs),
                "integration_time_s": integration,
                "baseline_window_ns": list(baseline),
                "plateau_window_ns": list(plateau),
                "runs": [{"dB_G": dB, **runs[dB]} for dB in dB_values],
            },
        )
    )
    return _finish(exp, written)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "robustness": cmd_robustness,
    "thermal": cmd_thermal,
    "time-resolved": cmd_time_resolved,
}
