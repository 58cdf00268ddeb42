"""Test lib/odmr_analysis.py."""

from math import radians, sqrt

import numpy as np
import pytest


def operating_point(Omega: float = 0.95, theta_deg: float = 10.0):
    """NV, field and reference sweep at 47 G used across the tests."""
    from lib.lindblad import CollapseSet, ReadoutModel
    from lib.odmr_analysis import default_sweep
    from lib.spin_model import FieldVector, NVParams, drive_at_resonance

    nv = NVParams()
    B = FieldVector(47.0, radians(theta_deg))
    cfg = default_sweep(
        drive_at_resonance(nv, B, Omega), CollapseSet(10.0), ReadoutModel(1e6, 0.3)
    )
    return nv, B, cfg


def local_minima(pl: np.ndarray) -> np.ndarray:
    """Indices of strict local minima."""
    return np.flatnonzero((pl[1:-1] < pl[:-2]) & (pl[1:-1] < pl[2:])) + 1


def test_lorentzian():
    """Test `lorentzian` at the centre and at half width."""
    from lib.odmr_analysis import lorentzian

    assert lorentzian(2870.0, 2870.0, 10.0, 0.1, 1e6) == pytest.approx(0.9e6)
    assert lorentzian(2875.0, 2870.0, 10.0, 0.1, 1e6) == pytest.approx(0.95e6)
    assert lorentzian(2865.0, 2870.0, 10.0, 0.1, 1e6) == pytest.approx(0.95e6)


def test_power_broadened_width():
    """Test `power_broadened_width` for the two drive strengths in use."""
    from lib.odmr_analysis import power_broadened_width

    assert power_broadened_width(0.95, 10.0) == pytest.approx(10.7, abs=0.01)
    assert power_broadened_width(1.42, 10.0) == pytest.approx(11.5, abs=0.01)
    assert power_broadened_width(0.0, 10.0) == 10.0


def test_default_sweep():
    """Test `default_sweep` grid placement."""
    from lib.odmr_analysis import power_broadened_width

    _, _, cfg = operating_point()
    width = power_broadened_width(0.95, 10.0)

    assert cfg.frequencies.size == 121
    assert cfg.frequencies[60] == pytest.approx(cfg.drive.f_avg)
    assert cfg.frequencies[-1] - cfg.frequencies[0] == pytest.approx(6 * width)


def test_sweep_config_validation():
    """Test `SweepConfig` rejects grids that are not strictly increasing."""
    from lib.odmr_analysis import SweepConfig
    from lib.spin_model import DriveParams

    drive = DriveParams(1.0, 2738.4, 3001.6)
    with pytest.raises(ValueError):
        SweepConfig(np.array([1.0, 1.0, 2.0]), drive)
    with pytest.raises(ValueError):
        SweepConfig(np.array([]), drive)


def test_spectrum_validation():
    """Test `Spectrum` rejects mismatched grids and non-positive rates."""
    from lib.odmr_analysis import Spectrum

    with pytest.raises(ValueError):
        Spectrum(np.arange(3.0), np.ones(4))
    with pytest.raises(ValueError):
        Spectrum(np.arange(3.0), np.array([1.0, 0.0, 1.0]))

    s = Spectrum(np.arange(3.0), np.array([1.0, 0.5, 1.0]))
    assert s.contrast == pytest.approx(0.5)


def test_simulate_spectrum_and_fit():
    """Test `simulate_spectrum` gives a single power-broadened Lorentzian dip."""
    from lib.odmr_analysis import fit_lorentzian, power_broadened_width, simulate_spectrum
    from lib.spin_model import Detunings

    nv, B, cfg = operating_point()
    spectrum = simulate_spectrum(nv, B, Detunings(), cfg)
    fit = fit_lorentzian(spectrum)

    assert local_minima(spectrum.pl).size == 1
    assert fit.Gamma == pytest.approx(power_broadened_width(0.95, 10.0), rel=1e-4)
    assert fit.f_avg == pytest.approx(cfg.drive.f_avg, abs=1e-6)
    assert fit.baseline == pytest.approx(1e6, rel=1e-6)

    g2 = 2 * 0.95**2
    assert fit.C0 == pytest.approx(0.3 * g2 / (25 + 2 * g2), rel=1e-4)
    assert fit.residual_rms < 1e-3


def test_simulate_spectrum_threads():
    """Test `simulate_spectrum` gives the same result on several threads."""
    from lib.odmr_analysis import simulate_spectrum
    from lib.spin_model import Detunings

    nv, B, cfg = operating_point()
    single = simulate_spectrum(nv, B, Detunings(), cfg)
    multi = simulate_spectrum(nv, B, Detunings(), cfg, threads=3)

    np.testing.assert_array_equal(single.pl, multi.pl)


def test_simulate_spectrum_axial_sign():
    """Test `simulate_spectrum`: δBz and −δBz give the same spectrum."""
    from lib.odmr_analysis import simulate_spectrum
    from lib.spin_model import Detunings

    nv, B, cfg = operating_point()
    up = simulate_spectrum(nv, B, Detunings(dD=0.2, dBz=0.5, nv=nv, field=B), cfg)
    down = simulate_spectrum(nv, B, Detunings(dD=0.2, dBz=-0.5, nv=nv, field=B), cfg)

    np.testing.assert_allclose(up.pl, down.pl, rtol=1e-9)


def test_simulate_spectrum_invalid_drive():
    """Test `simulate_spectrum` refuses a Zeeman term below Ω."""
    from lib.errors import InvalidDriveError
    from lib.lindblad import CollapseSet, ReadoutModel
    from lib.odmr_analysis import default_sweep, simulate_spectrum
    from lib.spin_model import Detunings, FieldVector, NVParams, drive_at_resonance

    nv = NVParams()
    B = FieldVector(0.3, 0.0)
    cfg = default_sweep(drive_at_resonance(nv, B, 0.95), CollapseSet(), ReadoutModel())

    with pytest.raises(InvalidDriveError):
        simulate_spectrum(nv, B, Detunings(), cfg)


def test_field_detuning_family():
    """Test `field_detuning_family`: a large δ|B| splits the dip in two."""
    from lib.odmr_analysis import field_detuning_family

    nv, B, cfg = operating_point()
    family = field_detuning_family(nv, B, cfg, [0.0, 8.0])

    assert local_minima(family[0].pl).size == 1
    assert local_minima(family[1].pl).size == 2
    assert family[1].pl[60] > family[1].pl.min()


def test_simulate_single_tone_spectrum():
    """Test `simulate_single_tone_spectrum` dips at the lower transition."""
    from lib.lindblad import CollapseSet, ReadoutModel
    from lib.odmr_analysis import simulate_single_tone_spectrum

    nv, B, cfg = operating_point()
    omega1 = cfg.drive.omega1
    frequencies = np.linspace(omega1 - 20, omega1 + 20, 81)
    s = simulate_single_tone_spectrum(
        nv, B, 0.95, CollapseSet(10.0), ReadoutModel(1e6, 0.3), frequencies
    )

    assert abs(frequencies[np.argmin(s.pl)] - omega1) <= 0.5
    assert s.pl.max() < 1e6


def test_fit_lorentzian_exact():
    """Test `fit_lorentzian` recovers the parameters of a noiseless dip."""
    from lib.odmr_analysis import Spectrum, fit_lorentzian, lorentzian

    f = np.linspace(2840.0, 2900.0, 121)
    fit = fit_lorentzian(Spectrum(f, lorentzian(f, 2871.3, 11.5, 0.05, 1e6)))

    assert fit.f_avg == pytest.approx(2871.3, abs=1e-6)
    assert fit.Gamma == pytest.approx(11.5, rel=1e-6)
    assert fit.C0 == pytest.approx(0.05, rel=1e-6)
    assert fit.baseline == pytest.approx(1e6, rel=1e-9)
    np.testing.assert_allclose(fit.model(f), lorentzian(f, 2871.3, 11.5, 0.05, 1e6), rtol=1e-9)


def test_fit_lorentzian_failures():
    """Test `fit_lorentzian` on a flat spectrum and a too short one."""
    from lib.errors import FitError
    from lib.odmr_analysis import Spectrum, fit_lorentzian, lorentzian

    f = np.linspace(2840.0, 2900.0, 61)
    with pytest.raises(FitError):
        fit_lorentzian(Spectrum(f, np.full_like(f, 1e6)))

    short = np.linspace(2860.0, 2880.0, 5)
    with pytest.raises(FitError):
        fit_lorentzian(Spectrum(short, lorentzian(short, 2870.0, 10.0, 0.1, 1e6)))


def test_three_point_frequencies():
    """Test `three_point_frequencies` places the maximum-slope points."""
    from lib.odmr_analysis import three_point_frequencies

    f_B, f_E, f_0 = three_point_frequencies(2870.0, 12.0)

    assert f_B == pytest.approx(2870.0 - 6 / sqrt(3))
    assert f_E == pytest.approx(2870.0 + 6 / sqrt(3))
    assert f_0 == pytest.approx(2810.0)


@pytest.mark.parametrize("shift", [-0.4, -0.1, 0.05, 0.3])
def test_three_point_shift(shift):
    """Test `three_point_shift` on a displaced analytic dip."""
    from lib.odmr_analysis import lorentzian, three_point_frequencies, three_point_shift

    Gamma = 11.5
    f_B, f_E, _ = three_point_frequencies(2870.0, Gamma)
    pB, pE = lorentzian(np.array([f_B, f_E]), 2870.0 + shift, Gamma, 0.05, 1e6)

    assert three_point_shift(pB, pE, 1e6, Gamma) == pytest.approx(shift, rel=0.01)


def test_three_point_shift_edges():
    """Test `three_point_shift` with equal sides and at the background level."""
    from lib.errors import BackgroundLevelError
    from lib.odmr_analysis import three_point_shift

    assert three_point_shift(0.96e6, 0.96e6, 1e6, 11.5) == 0.0

    with pytest.raises(BackgroundLevelError):
        three_point_shift(1e6, 1e6, 1e6, 11.5)


def test_six_point_frequencies():
    """Test `six_point_frequencies` ordering and argument checks."""
    from lib.odmr_analysis import six_point_frequencies, three_point_frequencies

    six = six_point_frequencies(2870.0, 11.5, 1.0)
    f_B, f_E, _ = three_point_frequencies(2870.0, 11.5)

    assert six.freqs[1] == f_B
    assert six.freqs[4] == f_E
    assert np.all(np.diff(six.freqs) > 0)
    assert six.freqs[2] - six.freqs[0] == pytest.approx(2.0)

    with pytest.raises(ValueError):
        six_point_frequencies(2870.0, 11.5, 6.0)
    with pytest.raises(ValueError):
        six_point_frequencies(2870.0, 0.0, 1.0)


@pytest.mark.parametrize("dT", [0.5, 1.0, 2.0, 5.0, -3.0])
def test_six_point_temperature_oracle(dT):
    """Test `six_point_temperature` recovers injected shifts on an analytic dip."""
    from lib.odmr_analysis import lorentzian, six_point_frequencies, six_point_temperature

    dD_dT = -0.074
    six = six_point_frequencies(2870.0, 11.5, 1.0)
    p = lorentzian(np.array(six.freqs), 2870.0 + dD_dT * dT, 11.5, 0.05, 1e6)

    result = six_point_temperature(p, 1.0, dD_dT)
    assert not result.unstable
    assert result.dT == pytest.approx(dT, rel=0.05)


def test_six_point_temperature_edges():
    """Test `six_point_temperature` with p_B = p_E, noise floor and array input."""
    from lib.odmr_analysis import six_point_temperature

    p = [0.97e6, 0.96e6, 0.95e6, 0.95e6, 0.96e6, 0.97e6]
    assert six_point_temperature(p, 1.0, -0.074).dT == 0.0

    flat = [1e6] * 6
    result = six_point_temperature(flat, 1.0, -0.074, noise_floor=1.0)
    assert not result.unstable
    assert result.dT == 0.0

    ramp = [1e6 + 1e3 * k for k in range(6)]
    result = six_point_temperature(ramp, 1.0, -0.074, noise_floor=1.0)
    assert result.unstable
    assert np.isnan(result.dT)

    stacked = np.column_stack([p, flat, ramp])
    result = six_point_temperature(stacked, 1.0, -0.074, noise_floor=1.0)
    assert result.unstable.tolist() == [False, False, True]
    assert result.dT[:2].tolist() == [0.0, 0.0]

    with pytest.raises(ValueError):
        six_point_temperature([1.0] * 5, 1.0, -0.074)


def test_shot_noise_sensitivity():
    """Test `shot_noise_sensitivity` formula and argument checks."""
    from lib.odmr_analysis import shot_noise_sensitivity

    eta = shot_noise_sensitivity(11.5, 0.05, 1e6, -0.074)
    assert eta == pytest.approx(0.77 * 11.5 / (0.05 * 0.074 * 1e3))

    with pytest.raises(ValueError):
        shot_noise_sensitivity(11.5, 0.0, 1e6, -0.074)
    with pytest.raises(ValueError):
        shot_noise_sensitivity(11.5, 0.05, 1e6, 0.0)


def test_six_point_noise_matches_shot_noise():
    """Test `six_point_noise` against the shot-noise-limited sensitivity."""
    from lib.odmr_analysis import (
        LorentzianFit,
        shot_noise_sensitivity,
        six_point_frequencies,
        six_point_noise,
    )

    fit = LorentzianFit(2870.0, 11.5, 0.05, 1e6)
    six = six_point_frequencies(fit.f_avg, fit.Gamma, 1.0)
    eta = shot_noise_sensitivity(fit.Gamma, fit.C0, fit.baseline, -0.074)

    noise = six_point_noise(fit, six, -0.074, dwell_s=1.0, repetitions=400, seed=1)

    assert noise.repetitions == 400
    assert noise.unstable_fraction == 0.0
    assert noise.sensitivity == pytest.approx(eta, rel=0.25)


def test_six_point_noise_scaling():
    """Test `six_point_noise` RMS falls as 1/√n over two decades of counts."""
    from lib.odmr_analysis import LorentzianFit, six_point_frequencies, six_point_noise

    fit = LorentzianFit(2870.0, 11.5, 0.05, 1e6)
    six = six_point_frequencies(fit.f_avg, fit.Gamma, 1.0)

    rms = [
        six_point_noise(fit, six, -0.074, dwell, repetitions=2000, seed=7).rms
        for dwell in (1.0, 10.0, 100.0)
    ]

    assert rms[0] / rms[1] == pytest.approx(sqrt(10), rel=0.1)
    assert rms[0] / rms[2] == pytest.approx(10, rel=0.1)


def test_six_point_noise_reproducible():
    """Test `six_point_noise` is reproducible for a fixed seed."""
    from lib.odmr_analysis import LorentzianFit, six_point_frequencies, six_point_noise

    fit = LorentzianFit(2870.0, 11.5, 0.05, 1e6)
    six = six_point_frequencies(fit.f_avg, fit.Gamma, 1.0)

    a = six_point_noise(fit, six, -0.074, 1.0, repetitions=50, seed=3)
    b = six_point_noise(fit, six, -0.074, 1.0, repetitions=50, seed=3)
    assert a == b


def test_robustness_slope_attenuation():
    """Test `robustness_slope`: the dressed f_avg barely follows |B|."""
    from lib.odmr_analysis import robustness_slope
    from lib.spin_model import bare_field_slope

    nv, B, cfg = operating_point()
    dressed = robustness_slope(nv, B, cfg)
    bare = bare_field_slope(nv, B)

    expected = 3 * nv.gamma_e**2 * B.B_mag * np.sin(B.theta) ** 2 / nv.D0
    assert dressed == pytest.approx(expected, rel=0.1)
    assert abs(dressed) <= 0.1
    assert bare == pytest.approx(2.8, rel=0.02)
    assert abs(bare / dressed) >= 20


def test_measured_center():
    """Test `measured_center` with both extraction methods."""
    from lib.odmr_analysis import fit_lorentzian, measured_center, simulate_spectrum
    from lib.spin_model import Detunings

    nv, B, cfg = operating_point()
    reference = fit_lorentzian(simulate_spectrum(nv, B, Detunings(), cfg))
    moved = Detunings(dD=0.3, nv=nv, field=B)

    three = measured_center(nv, B, moved, cfg, reference)
    fitted = measured_center(nv, B, moved, cfg, reference, extraction="fit")

    assert three - reference.f_avg == pytest.approx(0.3, rel=0.03)
    assert fitted - reference.f_avg == pytest.approx(0.3, rel=1e-4)

    with pytest.raises(ValueError):
        measured_center(nv, B, moved, cfg, reference, extraction="centroid")  # type: ignore[arg-type]


def test_field_robustness_map():
    """Test `field_robustness_map`: a low-slope region spans the grid."""
    from lib.lindblad import CollapseSet, ReadoutModel
    from lib.odmr_analysis import field_robustness_map
    from lib.spin_model import DriveParams, NVParams

    nv = NVParams()
    m = field_robustness_map(
        nv,
        DriveParams(0.95, 2738.4, 3001.6),
        CollapseSet(10.0),
        ReadoutModel(),
        np.linspace(20, 200, 8),
        np.radians(np.linspace(0, 45, 8)),
        points=61,
        threads=2,
    )

    assert m.slope.shape == (8, 8)
    assert not m.reasons
    below = m.region_below(abs(nv.dD_dT) * 1e3)
    assert below.any(axis=1).sum() >= 3
    assert below.any(axis=0).sum() >= 3
    assert not below[-1, -1]
    assert m.slope[-1, -1] == pytest.approx(8.195 * 200 * 0.5, rel=0.1)


def test_field_robustness_map_invalid_cells():
    """Test `field_robustness_map` marks cells where γₑBz ≤ Ω."""
    from lib.lindblad import CollapseSet, ReadoutModel
    from lib.odmr_analysis import field_robustness_map
    from lib.spin_model import DriveParams, NVParams

    m = field_robustness_map(
        NVParams(),
        DriveParams(0.95, 2738.4, 3001.6),
        CollapseSet(10.0),
        ReadoutModel(),
        [0.2, 47.0],
        [0.0],
        points=41,
    )

    assert np.isnan(m.slope[0, 0])
    assert (0, 0) in m.reasons
    assert np.isfinite(m.slope[1, 0])


def test_field_line_scan():
    """Test `field_line_scan` compares the dressed and bare responses."""
    from lib.odmr_analysis import field_line_scan

    nv, B, cfg = operating_point()
    scan = field_line_scan(nv, B, cfg, [-1.0, 0.0, 1.0])

    assert scan.dressed_shift[1] == pytest.approx(0.0, abs=1e-6)
    assert scan.bare_shift[1] == 0.0
    assert scan.bare_shift[2] == pytest.approx(2.8, rel=0.02)
    assert np.all(np.abs(scan.dressed_shift) < 0.1)
    assert abs(scan.bare_slope / scan.dressed_slope) >= 20


def test_field_line_scan_interrupted():
    """Test `field_line_scan` stops with NumericalError once the stop event is set."""
    from threading import Event

    from lib.errors import NumericalError
    from lib.odmr_analysis import field_line_scan

    nv, B, cfg = operating_point()
    stop = Event()
    stop.set()

    with pytest.raises(NumericalError, match="interrupted"):
        field_line_scan(nv, B, cfg, [-1.0, 0.0, 1.0], stop_event=stop)


def test_spectrum_response():
    """Test `spectrum_response` interpolates and clamps to the grid."""
    from lib.odmr_analysis import Spectrum, lorentzian, spectrum_response

    f = np.linspace(2850.0, 2890.0, 81)
    s = Spectrum(f, lorentzian(f, 2870.0, 11.5, 0.05, 1e6))
    response = spectrum_response(s)

    np.testing.assert_allclose(response(f), s.pl, rtol=1e-12)
    assert response(np.array([2871.23]))[0] == pytest.approx(
        lorentzian(2871.23, 2870.0, 11.5, 0.05, 1e6), rel=1e-5
    )
    assert response(np.array([3000.0]))[0] == pytest.approx(s.pl[-1])


def test_writers(tmp_path):
    """Test the CSV and JSON writers."""
    import json

    from lib.file import read_columns
    from lib.odmr_analysis import (
        LineScan,
        LorentzianFit,
        RobustnessMap,
        Spectrum,
        write_family_csv,
        write_fit_json,
        write_line_scan_csv,
        write_robustness_csv,
        write_spectrum_csv,
    )

    s = Spectrum(np.array([1.0, 2.0, 3.0]), np.array([1.0, 0.5, 1.0]))
    columns = read_columns(write_spectrum_csv(str(tmp_path / "s.csv"), s))
    np.testing.assert_array_equal(columns["pl_cps"], s.pl)

    columns = read_columns(write_family_csv(str(tmp_path / "f.csv"), [0.0, 2.0], [s, s]))
    np.testing.assert_array_equal(columns["dB_G"], [0, 0, 0, 2, 2, 2])

    fit = LorentzianFit(2870.0, 11.5, 0.05, 1e6, 0.1)
    with open(write_fit_json(str(tmp_path / "fit.json"), fit)) as f:
        assert json.load(f)["Gamma"] == 11.5

    m = RobustnessMap(np.array([20.0, 40.0]), np.array([0.0, 0.1, 0.2]), np.ones((2, 3)))
    columns = read_columns(write_robustness_csv(str(tmp_path / "m.csv"), m))
    assert columns["B_G"].tolist() == [20, 20, 20, 40, 40, 40]

    scan = LineScan(np.array([-1.0, 1.0]), np.zeros(2), np.array([-2.8, 2.8]), 0.01, 2.8)
    columns = read_columns(write_line_scan_csv(str(tmp_path / "l.csv"), scan))
    np.testing.assert_array_equal(columns["bare_MHz"], [-2.8, 2.8])
