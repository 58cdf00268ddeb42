"""NV ground-state Hamiltonian library.

Matrices use the bare ordering |+1⟩, |0⟩, |−1⟩ or the dressed ordering
|Bright⟩, |0⟩, |Dark⟩. Every entry is an ordinary frequency in MHz.
"""

import logging
from configparser import ConfigParser
from dataclasses import dataclass, field, replace
from enum import Enum
from math import atan2, cos, hypot, pi, sin, sqrt
from typing import NamedTuple

import numpy as np

from lib.errors import InvalidDriveError, NonHermitianError, NumericalError

logger = logging.getLogger(__name__)

LAMBDA_VALIDITY = 0.2
HERMITIAN_RTOL = 1e-12
EIGEN_RESIDUAL = 1e-10


class Basis(Enum):
    """Basis a 3×3 operator is written in."""

    BARE = "bare"
    DRESSED = "dressed"


@dataclass(frozen=True)
class NVParams:
    """Physical constants of one NV orientation class.

    Attributes
    ----------
    D0 : float
        Zero-field splitting at the reference temperature (MHz).
    dD_dT : float
        Thermal shift coefficient (MHz/K), negative for a real NV centre.
    gamma_e : float
        Electron gyromagnetic ratio (MHz/G).
    E : float
        Off-axis strain (MHz).
    """

    D0: float = 2870.0
    dD_dT: float = -0.074
    gamma_e: float = 2.8
    E: float = 0.0

    def __post_init__(self):
        if self.D0 <= 0:
            raise ValueError(f"D0 must be positive (got {self.D0})")
        if self.gamma_e <= 0:
            raise ValueError(f"gamma_e must be positive (got {self.gamma_e})")
        if self.E < 0:
            raise ValueError(f"E must be non-negative (got {self.E})")

    def D(self, T_shift: float = 0.0) -> float:
        """Zero-field splitting after a temperature change `T_shift` (K)."""
        return self.D0 + self.dD_dT * T_shift


@dataclass(frozen=True)
class FieldVector:
    """Static magnetic field seen by the NV centre.

    Attributes
    ----------
    B_mag : float
        Field magnitude (G).
    theta : float
        Angle between the field and the NV axis (rad), in [0, π/2].
    """

    B_mag: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        if self.B_mag < 0:
            raise ValueError(f"B_mag must be non-negative (got {self.B_mag})")
        if not -1e-12 <= self.theta <= pi / 2 + 1e-12:
            raise ValueError(f"theta must lie in [0, π/2] (got {self.theta})")

    @property
    def Bz(self) -> float:
        """Axial component (G)."""
        return self.B_mag * cos(self.theta)

    @property
    def Bx(self) -> float:
        """Transverse component (G)."""
        return self.B_mag * sin(self.theta)


def field_from_components(Bz: float, Bx: float) -> FieldVector:
    """Build a field from its axial and transverse components.

    Signs are dropped: the NV symmetry maps negative components onto the
    positive quadrant without changing the transition frequencies.

    Parameters
    ----------
    Bz : float
        Axial component (G).
    Bx : float
        Transverse component (G).

    Returns
    -------
    FieldVector
        Equivalent field.

    """
    return FieldVector(hypot(Bz, Bx), atan2(abs(Bx), abs(Bz)))


@dataclass(frozen=True)
class DriveParams:
    """Two-tone microwave drive.

    Attributes
    ----------
    Omega : float
        Rabi frequency of each tone (MHz).
    omega1 : float
        Tone addressing |0⟩ ↔ |−1⟩ (MHz).
    omega2 : float
        Tone addressing |0⟩ ↔ |+1⟩ (MHz).
    """

    Omega: float
    omega1: float
    omega2: float

    def __post_init__(self):
        if self.Omega <= 0:
            raise ValueError(f"Omega must be positive (got {self.Omega})")
        if self.omega2 < self.omega1:
            raise ValueError(
                f"omega2 ({self.omega2}) must not be below omega1 ({self.omega1})"
            )

    @property
    def f_avg(self) -> float:
        """Common centre frequency of the two tones (MHz)."""
        return (self.omega1 + self.omega2) / 2

    @property
    def splitting(self) -> float:
        """Tone separation ω₂ − ω₁ (MHz)."""
        return self.omega2 - self.omega1

    @property
    def valid(self) -> bool:
        """Whether the tones address the two transitions independently.

        Half the tone separation is the Zeeman term γₑBz, which has to exceed Ω.
        """
        return self.splitting / 2 > self.Omega


@dataclass(frozen=True)
class Detunings:
    """Environmental changes around the operating point.

    Attributes
    ----------
    dD : float
        Zero-field-splitting shift (MHz).
    dBz : float
        Axial field change (G).
    dBx : float
        Transverse field change (G).
    nv : NVParams
        Constants used to convert field changes into frequencies.
    field : FieldVector
        Operating field the changes are taken around.
    """

    dD: float = 0.0
    dBz: float = 0.0
    dBx: float = 0.0
    nv: NVParams = field(default_factory=NVParams)
    field: FieldVector = field(default_factory=FieldVector)

    @property
    def delta_D(self) -> float:
        """Common detuning of |Bright⟩ and |Dark⟩ (MHz)."""
        g = self.nv.gamma_e
        return self.dD + 3 * (g * self.field.Bx / self.nv.D0) * g * self.dBx

    @property
    def delta_B(self) -> float:
        """Bright–dark coupling (MHz)."""
        return self.nv.gamma_e * self.dBz


def field_detunings(
    nv: NVParams, B: FieldVector, dB_mag: float, dD: float = 0.0
) -> Detunings:
    """Detunings produced by a change `dB_mag` of the field magnitude.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Operating field.
    dB_mag : float
        Change of |B| at fixed direction (G).
    dD : float
        Additional zero-field-splitting shift (MHz).

    Returns
    -------
    Detunings
        Corresponding detunings.

    """
    return Detunings(
        dD=dD,
        dBz=dB_mag * cos(B.theta),
        dBx=dB_mag * sin(B.theta),
        nv=nv,
        field=B,
    )


@dataclass(frozen=True, eq=False)
class Matrix3:
    """A 3×3 complex operator tagged with its basis."""

    data: np.ndarray
    basis: Basis

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.shape != (3, 3):
            raise ValueError(f"expected a 3×3 matrix, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        """Check hermiticity relative to the matrix norm."""
        scale = max(np.linalg.norm(self.data), 1.0)
        return bool(np.linalg.norm(self.data - self.data.conj().T) <= rtol * scale)

    def eigh(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigen-decomposition with a residual check.

        Returns
        -------
        tuple[np.ndarray, np.ndarray]
            Ascending eigenvalues and the matching eigenvectors (columns).

        """
        if not self.is_hermitian():
            raise NonHermitianError("matrix is not Hermitian")

        values, vectors = np.linalg.eigh(self.data)
        residual = np.linalg.norm(self.data @ vectors - vectors * values)
        scale = max(np.linalg.norm(self.data), 1.0)
        if residual > EIGEN_RESIDUAL * scale:
            raise NumericalError(f"eigen-solve residual {residual:.3e} too large")

        return values, vectors


def spin_one() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spin-1 matrices in the |+1⟩, |0⟩, |−1⟩ ordering."""
    sx = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=complex) / sqrt(2)
    sy = np.array([[0, -1j, 0], [1j, 0, -1j], [0, 1j, 0]], dtype=complex) / sqrt(2)
    sz = np.diag([1.0, 0.0, -1.0]).astype(complex)
    return sx, sy, sz


def bare_hamiltonian(nv: NVParams, B: FieldVector, T_shift: float = 0.0) -> Matrix3:
    """Ground-state Hamiltonian D Sz² + γₑ B·S + E (Sx² − Sy²).

    The azimuth of the field is absorbed by the NV symmetry so the field
    lies in the x–z plane. Off-diagonal Zeeman entries therefore read
    γₑBx/√2.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Static field.
    T_shift : float
        Temperature change (K) entering D(T).

    Returns
    -------
    Matrix3
        Bare-basis Hamiltonian (MHz).

    """
    sx, sy, sz = spin_one()
    g = nv.gamma_e
    H = (
        nv.D(T_shift) * sz @ sz
        + g * (B.Bz * sz + B.Bx * sx)
        + nv.E * (sx @ sx - sy @ sy)
    )
    return Matrix3(H, Basis.BARE)


def transition_frequencies(H: Matrix3) -> tuple[float, float]:
    """Single-tone resonances of a bare Hamiltonian.

    Parameters
    ----------
    H : Matrix3
        Hermitian bare-basis Hamiltonian.

    Returns
    -------
    tuple[float, float]
        ω₁ = e1 − e0 and ω₂ = e2 − e0 (MHz) with ascending eigenvalues.

    """
    if H.basis is not Basis.BARE:
        raise ValueError(f"expected a bare-basis Hamiltonian, got {H.basis.value}")

    e, _ = H.eigh()
    return float(e[1] - e[0]), float(e[2] - e[0])


class LambdaApprox(NamedTuple):
    """Approximate level splittings and their validity flag."""

    lambda_minus: float
    lambda_plus: float
    valid: bool


def lambda_approx(nv: NVParams, B: FieldVector, T_shift: float = 0.0) -> LambdaApprox:
    """Second-order level splittings λ± = D ± γₑBz + (3/2)(γₑBx/D)γₑBx.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Static field.
    T_shift : float
        Temperature change (K).

    Returns
    -------
    LambdaApprox
        λ₋, λ₊ (MHz) and whether γₑBx/D stays below the validity threshold.

    """
    D = nv.D(T_shift)
    g = nv.gamma_e
    ratio = g * B.Bx / D
    valid = ratio < LAMBDA_VALIDITY
    if not valid:
        logger.warning(
            f"γₑBx/D = {ratio:.3f} exceeds {LAMBDA_VALIDITY}, λ± is unreliable"
        )

    correction = 1.5 * ratio * g * B.Bx
    return LambdaApprox(D - g * B.Bz + correction, D + g * B.Bz + correction, valid)


def drive_at_resonance(
    nv: NVParams, B: FieldVector, Omega: float, T_shift: float = 0.0
) -> DriveParams:
    """Put both tones on the exact single-tone resonances.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Static field.
    Omega : float
        Rabi frequency of each tone (MHz).
    T_shift : float
        Temperature change (K).

    Returns
    -------
    DriveParams
        Resonant two-tone drive.

    """
    omega1, omega2 = transition_frequencies(bare_hamiltonian(nv, B, T_shift))
    return DriveParams(Omega, omega1, omega2)


def check_drive(drive: DriveParams, nv: NVParams | None = None, B: FieldVector | None = None):
    """Reject a drive that cannot address both transitions separately.

    Parameters
    ----------
    drive : DriveParams
        Drive to check.
    nv : NVParams | None
        If given together with `B`, the Zeeman term γₑBz is checked too.
    B : FieldVector | None
        Operating field.

    """
    if not drive.valid:
        raise InvalidDriveError(
            f"tone separation {drive.splitting:.3f} MHz gives γₑBz ≤ Ω = {drive.Omega} MHz"
        )
    if nv is not None and B is not None and nv.gamma_e * B.Bz <= drive.Omega:
        raise InvalidDriveError(
            f"γₑBz = {nv.gamma_e * B.Bz:.3f} MHz does not exceed Ω = {drive.Omega} MHz"
        )


def dressed_matrix(delta_D: float, delta_B: float, Omega: float) -> Matrix3:
    """Dressed-basis Hamiltonian for explicit detunings (MHz)."""
    r = sqrt(2) * Omega
    H = np.array(
        [[delta_D, r, delta_B], [r, 0.0, 0.0], [delta_B, 0.0, delta_D]],
        dtype=complex,
    )
    return Matrix3(H, Basis.DRESSED)


def dressed_hamiltonian(det: Detunings, drive: DriveParams) -> Matrix3:
    """Two-tone Hamiltonian in the dressed basis and doubly rotating frame.

    Parameters
    ----------
    det : Detunings
        Environmental detunings.
    drive : DriveParams
        Two-tone drive; must be valid.

    Returns
    -------
    Matrix3
        [[δ_D, √2Ω, δ_B], [√2Ω, 0, 0], [δ_B, 0, δ_D]] in the dressed basis.

    """
    check_drive(drive)
    return dressed_matrix(det.delta_D, det.delta_B, drive.Omega)


def dressed_from_bare(
    nv: NVParams,
    B: FieldVector,
    det_raw: tuple[float, float, float],
    drive: DriveParams,
) -> Matrix3:
    """Dressed Hamiltonian from raw changes (dD, dBz, dBx) around `B`.

    Raises InvalidDriveError when γₑBz does not exceed Ω.
    """
    check_drive(drive, nv, B)
    dD, dBz, dBx = det_raw
    return dressed_hamiltonian(Detunings(dD, dBz, dBx, nv, B), drive)


def exact_detunings(
    nv: NVParams,
    B: FieldVector,
    det_raw: tuple[float, float, float],
    T_shift: float = 0.0,
) -> tuple[float, float]:
    """Detunings from the exact eigensolve of the perturbed Hamiltonian.

    Parameters
    ----------
    nv : NVParams
        NV constants.
    B : FieldVector
        Operating field.
    det_raw : tuple[float, float, float]
        Changes (dD in MHz, dBz in G, dBx in G).
    T_shift : float
        Temperature change (K) of the operating point.

    Returns
    -------
    tuple[float, float]
        δ_D = (δ₁ + δ₂)/2 and δ_B = (δ₂ − δ₁)/2 (MHz), δ₁₍₂₎ being the change
        of ω₁₍₂₎.

    """
    dD, dBz, dBx = det_raw
    omega1, omega2 = transition_frequencies(bare_hamiltonian(nv, B, T_shift))
    moved_nv = replace(nv, D0=nv.D0 + dD)
    moved_B = field_from_components(B.Bz + dBz, B.Bx + dBx)
    new1, new2 = transition_frequencies(bare_hamiltonian(moved_nv, moved_B, T_shift))
    d1, d2 = new1 - omega1, new2 - omega2
    return (d1 + d2) / 2, (d2 - d1) / 2


def bare_field_slope(nv: NVParams, B: FieldVector, h: float = 0.2) -> float:
    """Slope of the upper single-tone resonance with |B| (MHz/G).

    Central difference at fixed direction; this is the bare-state reference the
    dressed-state robustness is compared with.
    """
    up = FieldVector(B.B_mag + h, B.theta)
    down = FieldVector(max(B.B_mag - h, 0.0), B.theta)
    _, w_up = transition_frequencies(bare_hamiltonian(nv, up))
    _, w_down = transition_frequencies(bare_hamiltonian(nv, down))
    return (w_up - w_down) / (up.B_mag - down.B_mag)


def strain_response(
    nv: NVParams, B: FieldVector, E_values: np.ndarray | list[float]
) -> np.ndarray:
    """Exact ω₁, ω₂ as a function of strain.

    Returns
    -------
    np.ndarray
        Shape (len(E_values), 2), MHz.

    """
    return np.array(
        [
            transition_frequencies(bare_hamiltonian(replace(nv, E=float(E)), B))
            for E in E_values
        ]
    )


def single_tone_hamiltonian(detuning: float, Omega: float, splitting: float) -> Matrix3:
    """Bare-basis Hamiltonian of one tone in its rotating frame.

    Parameters
    ----------
    detuning : float
        ω₁ − f, the lower resonance minus the tone frequency (MHz).
    Omega : float
        Rabi frequency of the tone (MHz).
    splitting : float
        ω₂ − ω₁; |+1⟩ sits that far above |−1⟩ in the rotating frame (MHz).

    Returns
    -------
    Matrix3
        Bare-basis Hamiltonian.

    """
    H = np.array(
        [
            [detuning + splitting, Omega, 0.0],
            [Omega, 0.0, Omega],
            [0.0, Omega, detuning],
        ],
        dtype=complex,
    )
    return Matrix3(H, Basis.BARE)


def _as_config(config: str | ConfigParser) -> ConfigParser:
    from lib.cfg import parse_config

    return parse_config(config) if isinstance(config, str) else config


def nv_from_config(config: str | ConfigParser) -> NVParams:
    """Read the `[nv]` section of a configuration file or parsed configuration."""
    cfg = _as_config(config)
    return NVParams(
        D0=cfg.getfloat("nv", "D0"),
        dD_dT=cfg.getfloat("nv", "dD_dT"),
        gamma_e=cfg.getfloat("nv", "gamma_e"),
        E=cfg.getfloat("nv", "E"),
    )


def field_from_config(config: str | ConfigParser) -> FieldVector:
    """Read the `[field]` section; angles are given in degrees."""
    from math import radians

    cfg = _as_config(config)
    return FieldVector(
        cfg.getfloat("field", "B_mag"), radians(cfg.getfloat("field", "theta_deg"))
    )
