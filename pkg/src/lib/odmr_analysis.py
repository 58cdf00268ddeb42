"""DS-ODMR spectra, Lorentzian fits and temperature extraction.

Conventions
-----------
The common centre frequency f is swept with the tone separation held fixed.
A sweep offset Δf = f − f_nominal enters the dressed Hamiltonian as
δ_D − Δf, so a dip sits at f_nominal + δ_D.

`three_point_shift` returns (p_E − p_B)/(p_B + p_E − 2p₀)·Γ/√3 and
`six_point_temperature` returns (p_B − p_E)/((p_A − p_C) − (p_D − p_F))·2dω/(dD/dT).
With these signs a dip moving up in frequency gives a positive shift, and a
D-shift of dD/dT·δT gives back δT.
"""

import logging
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field, replace
from math import sqrt
from threading import Event
from typing import Literal, NamedTuple

import numpy as np

from lib.errors import BackgroundLevelError, FitError, NumericalError
from lib.lindblad import CollapseSet, ReadoutModel, steady_pl
from lib.spin_model import (
    Basis,
    Detunings,
    DriveParams,
    FieldVector,
    NVParams,
    bare_field_slope,
    bare_hamiltonian,
    check_drive,
    drive_at_resonance,
    dressed_matrix,
    exact_detunings,
    field_detunings,
    lambda_approx,
    single_tone_hamiltonian,
    transition_frequencies,
)

logger = logging.getLogger(__name__)

SQRT3 = sqrt(3)
SHOT_NOISE_FACTOR = 0.77
BACKGROUND_RTOL = 1e-12
FIT_MAX_NFEV = 200
MIN_FIT_POINTS = 7

Response = Callable[[np.ndarray], np.ndarray]
Extraction = Literal["three_point", "fit"]


@dataclass(frozen=True, eq=False)
class SweepConfig:
    """Frequency sweep of the common centre frequency.

    Attributes
    ----------
    frequencies : np.ndarray
        Strictly increasing centre frequencies f (MHz).
    drive : DriveParams
        Nominal tones; their separation ω₂ − ω₁ stays fixed during the sweep.
    collapse : CollapseSet
        Optical repolarisation.
    readout : ReadoutModel
        Photon-rate model.
    """

    frequencies: np.ndarray
    drive: DriveParams
    collapse: CollapseSet = field(default_factory=CollapseSet)
    readout: ReadoutModel = field(default_factory=ReadoutModel)

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("frequency grid must be a non-empty 1-D array")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        object.__setattr__(self, "frequencies", f)

    @property
    def splitting(self) -> float:
        """Fixed tone separation ω₂ − ω₁ (MHz)."""
        return self.drive.splitting


@dataclass(frozen=True)
class LorentzianFit:
    """Fitted dip baseline·(1 − C0/(1 + ((f − f_avg)/(Γ/2))²)).

    Attributes
    ----------
    f_avg : float
        Dip centre (MHz).
    Gamma : float
        Full width at half depth (MHz).
    C0 : float
        Contrast.
    baseline : float
        Off-resonant level (counts/s).
    residual_rms : float
        RMS of the fit residuals (counts/s).
    """

    f_avg: float
    Gamma: float
    C0: float
    baseline: float
    residual_rms: float = 0.0

    def model(self, f: np.ndarray | float) -> np.ndarray:
        """Evaluate the fitted curve."""
        return lorentzian(f, self.f_avg, self.Gamma, self.C0, self.baseline)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Photon rate as a function of the common centre frequency."""

    frequencies: np.ndarray
    pl: np.ndarray
    fit: LorentzianFit | None = None

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        pl = np.asarray(self.pl, dtype=float)
        if f.shape != pl.shape:
            raise ValueError(f"grid shapes differ: {f.shape} vs {pl.shape}")
        if np.any(pl <= 0):
            raise ValueError("photon rates must be positive")
        object.__setattr__(self, "frequencies", f)
        object.__setattr__(self, "pl", pl)

    @property
    def contrast(self) -> float:
        """Raw depth (max − min)/max of the sampled curve."""
        return float((self.pl.max() - self.pl.min()) / self.pl.max())


@dataclass(frozen=True)
class SixPointSet:
    """Probe frequencies f_A … f_F (MHz)."""

    freqs: tuple[float, float, float, float, float, float]
    d_omega: float
    Gamma_ref: float


class SixPointResult(NamedTuple):
    """Temperature change and instability flag, scalar or per delay."""

    dT: np.ndarray | float
    unstable: np.ndarray | bool


@dataclass(frozen=True, eq=False)
class RobustnessMap:
    """Slope ∂f_avg/∂|B| over a (|B|, θ) grid.

    Attributes
    ----------
    B_grid : np.ndarray
        Field magnitudes (G).
    theta_grid : np.ndarray
        Field angles (rad).
    slope : np.ndarray
        Shape (len(B_grid), len(theta_grid)) in kHz/G; NaN on invalid cells.
    reasons : dict[tuple[int, int], str]
        Why a cell was not computed.
    extraction : str
        Method used for f_avg.
    h : float
        Central-difference step (G).
    """

    B_grid: np.ndarray
    theta_grid: np.ndarray
    slope: np.ndarray
    reasons: dict[tuple[int, int], str] = field(default_factory=dict)
    extraction: str = "three_point"
    h: float = 0.2

    def region_below(self, threshold: float) -> np.ndarray:
        """Cells with |slope| ≤ `threshold` kHz/G."""
        with np.errstate(invalid="ignore"):
            return np.abs(self.slope) <= threshold


@dataclass(frozen=True, eq=False)
class LineScan:
    """f_avg change against δ|B| for the dressed and the bare scheme (MHz)."""

    dB: np.ndarray
    dressed_shift: np.ndarray
    bare_shift: np.ndarray
    dressed_slope: float
    bare_slope: float


@dataclass(frozen=True)
class NoiseEstimate:
    """Monte-Carlo statistics of the six-point estimator."""

    rms: float
    sensitivity: float
    unstable_fraction: float
    dwell_s: float
    repetitions: int


def lorentzian(
    f: np.ndarray | float, f_avg: float, Gamma: float, C0: float, baseline: float
) -> np.ndarray:
    """Dip baseline·(1 − C0/(1 + ((f − f_avg)/(Γ/2))²))."""
    u = 2 * (np.asarray(f, dtype=float) - f_avg) / Gamma
    return baseline * (1 - C0 / (1 + u**2))


def power_broadened_width(Omega: float, Gamma_gl: float) -> float:
    """Width √(Γ_gl² + 16Ω²) of the bright-state dip (MHz).

    The bright state couples to |0⟩ with √2Ω, and a two-level system with
    coupling g and decay Γ_gl has a full width of √(Γ_gl² + 8g²).
    """
    return sqrt(Gamma_gl**2 + 16 * Omega**2)


def default_sweep(
    drive: DriveParams,
    collapse: CollapseSet,
    readout: ReadoutModel,
    points: int = 121,
    span: float = 3.0,
    linewidth: float | None = None,
) -> SweepConfig:
    """Grid of `points` centre frequencies over f_avg ± span·Γ.

    Parameters
    ----------
    drive : DriveParams
        Nominal tones.
    collapse : CollapseSet
        Optical repolarisation.
    readout : ReadoutModel
        Photon-rate model.
    points : int
        Number of grid points.
    span : float
        Half-width of the grid in linewidths.
    linewidth : float | None
        Γ used to place the grid; the power-broadened width when omitted.

    Returns
    -------
    SweepConfig
        The sweep.

    """
    width = linewidth or power_broadened_width(drive.Omega, collapse.Gamma_gl)
    frequencies = np.linspace(
        drive.f_avg - span * width, drive.f_avg + span * width, points
    )
    return SweepConfig(frequencies, drive, collapse, readout)


def _environment(
    nv: NVParams, B: FieldVector, det_env: Detunings, exact: bool
) -> tuple[float, float]:
    if exact:
        return exact_detunings(nv, B, (det_env.dD, det_env.dBz, det_env.dBx))
    det = replace(det_env, nv=nv, field=B)
    return det.delta_D, det.delta_B


def _tone_mismatch(nv: NVParams, B: FieldVector, drive: DriveParams) -> tuple[float, float]:
    """Static (δ_D, δ_B) of tones that miss the exact resonances."""
    omega1, omega2 = transition_frequencies(bare_hamiltonian(nv, B))
    d1, d2 = omega1 - drive.omega1, omega2 - drive.omega2
    return (d1 + d2) / 2, (d2 - d1) / 2


def simulate_spectrum(
    nv: NVParams,
    B: FieldVector,
    det_env: Detunings,
    cfg: SweepConfig,
    exact: bool = False,
    threads: int = 1,
    stop_event: Event | None = None,
) -> Spectrum:
    """Steady-state DS-ODMR spectrum.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Operating field.
    det_env : Detunings
        Environmental changes; evaluated at `nv` and `B`.
    cfg : SweepConfig
        Sweep definition.
    exact : bool
        Take δ_D and δ_B from the exact eigensolve instead of the linear
        expressions.
    threads : int
        Worker threads.
    stop_event : Event | None
        Interrupts the sweep.

    Returns
    -------
    Spectrum
        Photon rate at every grid point.

    """
    from lib.threading import parallel_map

    check_drive(cfg.drive, nv, B)
    env_D, env_B = _environment(nv, B, det_env, exact)
    static_D, static_B = _tone_mismatch(nv, B, cfg.drive)
    delta_B = env_B + static_B
    offset = env_D + static_D + cfg.drive.f_avg

    def rate(f: float) -> float:
        H = dressed_matrix(offset - f, delta_B, cfg.drive.Omega)
        return steady_pl(H, cfg.collapse, cfg.readout)

    pl = parallel_map(rate, list(cfg.frequencies), threads, stop_event)
    return Spectrum(cfg.frequencies, np.array(pl))


def simulate_single_tone_spectrum(
    nv: NVParams,
    B: FieldVector,
    Omega: float,
    collapse: CollapseSet,
    readout: ReadoutModel,
    frequencies: np.ndarray,
) -> Spectrum:
    """Single-tone cw-ODMR around the lower transition ω₁.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Operating field.
    Omega : float
        Rabi frequency of the tone (MHz).
    collapse : CollapseSet
        Repolarisation rate; the operators are rebuilt in the bare basis.
    readout : ReadoutModel
        Photon-rate model.
    frequencies : np.ndarray
        Tone frequencies (MHz).

    Returns
    -------
    Spectrum
        Photon rate at every tone frequency.

    """
    omega1, omega2 = transition_frequencies(bare_hamiltonian(nv, B))
    bare = CollapseSet(collapse.Gamma_gl, Basis.BARE)
    pl = [
        steady_pl(single_tone_hamiltonian(omega1 - f, Omega, omega2 - omega1), bare, readout)
        for f in frequencies
    ]
    return Spectrum(frequencies, np.array(pl))


def _fit_seeds(f: np.ndarray, pl: np.ndarray) -> tuple[float, float, float, float]:
    n_edge = max(2, f.size // 20)
    baseline = float(np.mean(np.concatenate([pl[:n_edge], pl[-n_edge:]])))
    i_min = int(np.argmin(pl))
    depth = baseline - pl[i_min]
    if depth <= 1e-9 * baseline:
        raise FitError("flat spectrum: no dip to fit")

    below = np.flatnonzero(pl < baseline - depth / 2)
    spacing = float(np.min(np.diff(f)))
    width = max(float(f[below.max()] - f[below.min()]) + spacing, 2 * spacing)
    return float(f[i_min]), width, depth / baseline, baseline


def fit_lorentzian(s: Spectrum) -> LorentzianFit:
    """Least-squares Lorentzian fit of a dip.

    The fit is seeded from the spectrum minimum, the half-depth crossing and
    the mean of the grid edges, then refined by Levenberg–Marquardt.

    Parameters
    ----------
    s : Spectrum
        At least seven points spanning the dip.

    Returns
    -------
    LorentzianFit
        Fitted parameters and residual RMS.

    Raises
    ------
    FitError
        On a flat spectrum, non-convergence or unphysical parameters; the
        best iterate is attached when one exists.

    """
    from scipy.optimize import least_squares

    if s.frequencies.size < MIN_FIT_POINTS:
        raise FitError(f"need at least {MIN_FIT_POINTS} points, got {s.frequencies.size}")

    f0, width, contrast, baseline = _fit_seeds(s.frequencies, s.pl)
    logger.debug(
        f"Fit seeds: f_avg={f0:.4f} Γ={width:.4f} C0={contrast:.4f} baseline={baseline:.4g}"
    )

    # Centred, normalised coordinates keep the four parameters of order one.
    x = s.frequencies - f0
    y = s.pl / baseline

    def residuals(p: np.ndarray) -> np.ndarray:
        return lorentzian(x, p[0], p[1], p[2], p[3]) - y

    def jacobian(p: np.ndarray) -> np.ndarray:
        x0, G, C, b = p
        u = 2 * (x - x0) / G
        lor = 1 / (1 + u**2)
        return np.column_stack(
            [
                -b * C * 4 * u * lor**2 / G,
                -b * C * 2 * u**2 * lor**2 / G,
                -b * lor,
                1 - C * lor,
            ]
        )

    res = least_squares(
        residuals,
        np.array([0.0, width, contrast, 1.0]),
        jac=jacobian,
        method="lm",
        max_nfev=FIT_MAX_NFEV,
        ftol=1e-14,
        xtol=1e-14,
        gtol=1e-14,
    )
    x0, G, C, b = res.x
    fit = LorentzianFit(
        f_avg=float(f0 + x0),
        Gamma=float(abs(G)),
        C0=float(C),
        baseline=float(b * baseline),
        residual_rms=float(np.sqrt(np.mean(res.fun**2)) * baseline),
    )

    if not res.success:
        logger.warning(f"Lorentzian fit did not converge: {res.message}")
        raise FitError(f"fit did not converge: {res.message}", best=fit)
    if not (fit.Gamma > 0 and 0 < fit.C0 < 1):
        raise FitError(f"unphysical fit Γ={fit.Gamma:.4g} C0={fit.C0:.4g}", best=fit)

    logger.debug(f"Fit: {fit}")
    return fit


def three_point_frequencies(f_avg: float, Gamma: float) -> tuple[float, float, float]:
    """Maximum-slope points f_B, f_E and the background point f₀ = f_avg − 5Γ."""
    half = Gamma / (2 * SQRT3)
    return f_avg - half, f_avg + half, f_avg - 5 * Gamma


def three_point_shift(pB: float, pE: float, p0: float, Gamma: float) -> float:
    """Centre shift from the maximum-slope points (MHz).

    Parameters
    ----------
    pB : float
        Signal at f_B = f_avg − Γ/(2√3).
    pE : float
        Signal at f_E = f_avg + Γ/(2√3).
    p0 : float
        Background signal.
    Gamma : float
        Linewidth (MHz).

    Returns
    -------
    float
        Positive when the dip moved up in frequency.

    """
    den = pB + pE - 2 * p0
    if abs(den) < BACKGROUND_RTOL * abs(p0):
        raise BackgroundLevelError("p_B + p_E − 2p₀ is at the background level")
    return (pE - pB) / den * Gamma / SQRT3


def six_point_frequencies(f_avg: float, Gamma: float, d_omega: float) -> SixPointSet:
    """Six probe frequencies around the maximum-slope points.

    Parameters
    ----------
    f_avg : float
        Dip centre (MHz).
    Gamma : float
        Linewidth used for placement (MHz).
    d_omega : float
        Side-point offset dω (MHz), 0 < dω < Γ/2.

    Returns
    -------
    SixPointSet
        f_A, f_B, f_C around f_B and f_D, f_E, f_F around f_E.

    """
    if Gamma <= 0:
        raise ValueError(f"Gamma must be positive (got {Gamma})")
    if not 0 < d_omega < Gamma / 2:
        raise ValueError(f"d_omega must lie in (0, Γ/2) (got {d_omega})")

    f_B, f_E, _ = three_point_frequencies(f_avg, Gamma)
    freqs = (
        f_B - d_omega,
        f_B,
        f_B + d_omega,
        f_E - d_omega,
        f_E,
        f_E + d_omega,
    )
    return SixPointSet(freqs, d_omega, Gamma)


def six_point_temperature(
    p: Sequence[float] | np.ndarray,
    d_omega: float,
    dD_dT: float,
    noise_floor: np.ndarray | float = 0.0,
) -> SixPointResult:
    """Temperature change from six signals.

    Parameters
    ----------
    p : Sequence[float] | np.ndarray
        Signals p_A … p_F along the first axis; extra axes (e.g. delays) are
        broadcast.
    d_omega : float
        Side-point offset (MHz).
    dD_dT : float
        Thermal shift coefficient (MHz/K).
    noise_floor : np.ndarray | float
        Denominators with a magnitude at or below this are flagged unstable.

    Returns
    -------
    SixPointResult
        δT (NaN where unstable) and the instability flag. Equal p_B and p_E
        give δT = 0, never flagged.

    """
    p = np.asarray(p, dtype=float)
    if p.shape[0] != 6:
        raise ValueError(f"expected six signals, got {p.shape[0]}")

    pA, pB, pC, pD, pE, pF = p
    num = pB - pE
    den = (pA - pC) - (pD - pF)
    balanced = num == 0
    unstable = ~balanced & (np.abs(den) <= noise_floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        dT = np.where(unstable, np.nan, num / den * 2 * d_omega / dD_dT)
    dT = np.where(balanced, 0.0, dT)

    if p.ndim == 1:
        return SixPointResult(float(dT), bool(unstable))
    return SixPointResult(dT, unstable)


def shot_noise_sensitivity(Gamma: float, C0: float, R: float, dD_dT: float) -> float:
    """Shot-noise-limited sensitivity 0.77·Γ/(C0·|dD/dT|·√R) in K/√Hz."""
    for name, value in (("Gamma", Gamma), ("C0", C0), ("R", R)):
        if value <= 0:
            raise ValueError(f"{name} must be positive (got {value})")
    if dD_dT == 0:
        raise ValueError("dD_dT must be non-zero")

    return SHOT_NOISE_FACTOR * Gamma / (C0 * abs(dD_dT) * sqrt(R))


def six_point_noise(
    fit: LorentzianFit,
    six: SixPointSet,
    dD_dT: float,
    dwell_s: float,
    repetitions: int = 400,
    seed: int = 0,
) -> NoiseEstimate:
    """Poisson Monte-Carlo of the six-point estimator at zero temperature change.

    Parameters
    ----------
    fit : LorentzianFit
        Dip used as the photon-rate model.
    six : SixPointSet
        Probe frequencies.
    dD_dT : float
        Thermal shift coefficient (MHz/K).
    dwell_s : float
        Integration time on each frequency (s).
    repetitions : int
        Number of simulated measurements.
    seed : int
        Seed of the random generator.

    Returns
    -------
    NoiseEstimate
        RMS of δT and the sensitivity RMS·√(2·dwell), the time spent on f_B
        and f_E.

    """
    rng = np.random.default_rng(seed)
    means = fit.model(np.array(six.freqs)) * dwell_s
    counts = rng.poisson(means, size=(repetitions, 6)).T
    result = six_point_temperature(counts, six.d_omega, dD_dT)
    dT = np.asarray(result.dT)
    rms = float(np.sqrt(np.nanmean(dT**2)))

    return NoiseEstimate(
        rms=rms,
        sensitivity=rms * sqrt(2 * dwell_s),
        unstable_fraction=float(np.mean(result.unstable)),
        dwell_s=dwell_s,
        repetitions=repetitions,
    )


def _rates_at(
    nv: NVParams,
    B: FieldVector,
    det: Detunings,
    cfg: SweepConfig,
    freqs: Sequence[float],
    exact: bool,
) -> np.ndarray:
    order = np.argsort(freqs)
    sampled = simulate_spectrum(
        nv, B, det, replace(cfg, frequencies=np.asarray(freqs)[order]), exact
    )
    rates = np.empty(len(freqs))
    rates[order] = sampled.pl
    return rates


def measured_center(
    nv: NVParams,
    B: FieldVector,
    det: Detunings,
    cfg: SweepConfig,
    reference: LorentzianFit,
    extraction: Extraction = "three_point",
    linewidth: float | None = None,
    exact: bool = False,
) -> float:
    """Apparent f_avg under detunings `det`.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Operating field.
    det : Detunings
        Environmental changes.
    cfg : SweepConfig
        Sweep used for full-spectrum extraction.
    reference : LorentzianFit
        Fit at zero detuning; sets the three-point frequencies.
    extraction : Extraction
        `three_point` samples three frequencies, `fit` fits the whole sweep.
    linewidth : float | None
        Γ of the three-point formula; the reference fit width when omitted.
    exact : bool
        Use exact detunings.

    Returns
    -------
    float
        Centre frequency (MHz).

    """
    if extraction == "fit":
        return fit_lorentzian(simulate_spectrum(nv, B, det, cfg, exact)).f_avg
    if extraction != "three_point":
        raise ValueError(f"unknown extraction method {extraction!r}")

    Gamma = linewidth or reference.Gamma
    pB, pE, p0 = _rates_at(
        nv, B, det, cfg, three_point_frequencies(reference.f_avg, Gamma), exact
    )
    return reference.f_avg + three_point_shift(pB, pE, p0, Gamma)


def robustness_slope(
    nv: NVParams,
    B: FieldVector,
    cfg: SweepConfig,
    extraction: Extraction = "three_point",
    h: float = 0.2,
    linewidth: float | None = None,
    exact: bool = False,
) -> float:
    """Central-difference ∂f_avg/∂|B| at δ|B| = 0 (MHz/G)."""
    reference = fit_lorentzian(simulate_spectrum(nv, B, Detunings(), cfg, exact))
    up, down = (
        measured_center(
            nv, B, field_detunings(nv, B, sign * h), cfg, reference, extraction,
            linewidth, exact,
        )
        for sign in (1, -1)
    )
    return (up - down) / (2 * h)


def field_robustness_map(
    nv: NVParams,
    drive: DriveParams,
    collapse: CollapseSet,
    readout: ReadoutModel,
    B_grid: Sequence[float],
    theta_grid: Sequence[float],
    extraction: Extraction = "three_point",
    h: float = 0.2,
    linewidth: float | None = None,
    points: int = 121,
    span: float = 3.0,
    exact: bool = False,
    threads: int = 1,
    stop_event: Event | None = None,
) -> RobustnessMap:
    """Robustness slope over a (|B|, θ) grid.

    In every cell the tones are put back on the exact resonances with the Rabi
    frequency of `drive`. Cells where γₑBz ≤ Ω, or where the linear detuning
    model leaves its range, are marked instead of computed.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    drive : DriveParams
        Supplies Ω.
    collapse : CollapseSet
        Optical repolarisation.
    readout : ReadoutModel
        Photon-rate model.
    B_grid : Sequence[float]
        Field magnitudes (G).
    theta_grid : Sequence[float]
        Field angles (rad).
    extraction : Extraction
        f_avg extraction method.
    h : float
        Central-difference step (G).
    linewidth : float | None
        Γ of the three-point formula; fitted per cell when omitted.
    points : int
        Spectrum points of the reference sweep.
    span : float
        Reference sweep half-width in linewidths.
    exact : bool
        Use exact detunings.
    threads : int
        Worker threads; cells are spread over them.
    stop_event : Event | None
        Interrupts the map.

    Returns
    -------
    RobustnessMap
        Slopes in kHz/G.

    """
    from lib.threading import parallel_map

    B_grid = np.asarray(B_grid, dtype=float)
    theta_grid = np.asarray(theta_grid, dtype=float)
    cells = [(i, j) for i in range(B_grid.size) for j in range(theta_grid.size)]

    def cell_slope(cell: tuple[int, int]) -> tuple[float, str | None]:
        i, j = cell
        B = FieldVector(float(B_grid[i]), float(theta_grid[j]))
        if nv.gamma_e * B.Bz <= drive.Omega:
            return np.nan, f"γₑBz = {nv.gamma_e * B.Bz:.3f} MHz ≤ Ω"
        if not exact and not lambda_approx(nv, B).valid:
            return np.nan, "γₑBx/D outside the linear detuning range"

        cfg = default_sweep(
            drive_at_resonance(nv, B, drive.Omega), collapse, readout, points, span, linewidth
        )
        slope = 1e3 * robustness_slope(nv, B, cfg, extraction, h, linewidth, exact)
        logger.debug(f"|B| = {B.B_mag:.1f} G, θ = {B.theta:.3f} rad: {slope:.3f} kHz/G")
        return slope, None

    logger.info(f"Computing robustness map over {len(cells)} cells")
    results = parallel_map(cell_slope, cells, threads, stop_event)

    slope = np.full((B_grid.size, theta_grid.size), np.nan)
    reasons = {}
    for (i, j), (value, reason) in zip(cells, results):
        slope[i, j] = value
        if reason is not None:
            reasons[(i, j)] = reason

    return RobustnessMap(B_grid, theta_grid, slope, reasons, extraction, h)


def field_detuning_family(
    nv: NVParams,
    B: FieldVector,
    cfg: SweepConfig,
    dB_values: Sequence[float],
    exact: bool = False,
    threads: int = 1,
    stop_event: Event | None = None,
) -> list[Spectrum]:
    """Spectra for each change δ|B| of the field magnitude."""
    return [
        simulate_spectrum(nv, B, field_detunings(nv, B, dB), cfg, exact, threads, stop_event)
        for dB in dB_values
    ]


def field_line_scan(
    nv: NVParams,
    B: FieldVector,
    cfg: SweepConfig,
    dB_values: Sequence[float],
    linewidth: float | None = None,
    h: float = 0.2,
    exact: bool = False,
    stop_event: Event | None = None,
) -> LineScan:
    """Three-point f_avg change against δ|B|, with the bare ω₂ reference.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Operating field.
    cfg : SweepConfig
        Reference sweep.
    dB_values : Sequence[float]
        Field-magnitude changes (G).
    linewidth : float | None
        Γ of the three-point formula; fitted when omitted.
    h : float
        Step of the slopes at δ|B| = 0 (G).
    exact : bool
        Use exact detunings.
    stop_event : Event | None
        Checked before each δ|B| point; when set the scan raises NumericalError.

    Returns
    -------
    LineScan
        Shifts in MHz and slopes in MHz/G.

    """
    reference = fit_lorentzian(simulate_spectrum(nv, B, Detunings(), cfg, exact))
    dB = np.asarray(dB_values, dtype=float)
    centers = []
    for d in dB:
        if stop_event is not None and stop_event.is_set():
            raise NumericalError(f"interrupted at δ|B| = {d:g} G")
        centers.append(
            measured_center(
                nv, B, field_detunings(nv, B, d), cfg, reference, "three_point",
                linewidth, exact,
            )
        )
    dressed = np.array(centers) - reference.f_avg

    _, omega2 = transition_frequencies(bare_hamiltonian(nv, B))
    bare = np.array(
        [
            transition_frequencies(
                bare_hamiltonian(nv, FieldVector(B.B_mag + d, B.theta))
            )[1]
            - omega2
            for d in dB
        ]
    )

    return LineScan(
        dB=dB,
        dressed_shift=dressed,
        bare_shift=bare,
        dressed_slope=robustness_slope(nv, B, cfg, "three_point", h, linewidth, exact),
        bare_slope=bare_field_slope(nv, B, h),
    )


def lorentzian_response(fit: LorentzianFit) -> Response:
    """Photon rate (counts/s) of the fitted dip at arbitrary frequencies."""
    return fit.model


def spectrum_response(s: Spectrum) -> Response:
    """Cubic interpolation of a simulated spectrum, clamped to its grid."""
    from scipy.interpolate import CubicSpline

    spline = CubicSpline(s.frequencies, s.pl)
    lo, hi = s.frequencies[0], s.frequencies[-1]
    return lambda f: spline(np.clip(f, lo, hi))


def write_spectrum_csv(path: str, s: Spectrum) -> str:
    """Write `f_MHz,pl_cps`."""
    from lib.file import write_columns

    return write_columns(path, ["f_MHz", "pl_cps"], [s.frequencies, s.pl])


def write_family_csv(path: str, dB_values: Sequence[float], family: Sequence[Spectrum]) -> str:
    """Write `dB_G,f_MHz,pl_cps` for a family of spectra."""
    from lib.file import write_columns

    dB = np.concatenate([np.full(s.frequencies.size, d) for d, s in zip(dB_values, family)])
    f = np.concatenate([s.frequencies for s in family])
    pl = np.concatenate([s.pl for s in family])
    return write_columns(path, ["dB_G", "f_MHz", "pl_cps"], [dB, f, pl])


def write_fit_json(path: str, fit: LorentzianFit) -> str:
    """Write the fitted parameters."""
    from lib.file import write_json

    return write_json(path, asdict(fit))


def write_robustness_csv(path: str, m: RobustnessMap) -> str:
    """Write `B_G,theta_rad,slope_kHz_per_G`, one row per cell, NaN when invalid."""
    from lib.file import write_columns

    B, theta = np.meshgrid(m.B_grid, m.theta_grid, indexing="ij")
    return write_columns(
        path,
        ["B_G", "theta_rad", "slope_kHz_per_G"],
        [B.ravel(), theta.ravel(), m.slope.ravel()],
    )


def write_line_scan_csv(path: str, scan: LineScan) -> str:
    """Write `dB_G,dressed_MHz,bare_MHz`."""
    from lib.file import write_columns

    return write_columns(
        path, ["dB_G", "dressed_MHz", "bare_MHz"], [scan.dB, scan.dressed_shift, scan.bare_shift]
    )
