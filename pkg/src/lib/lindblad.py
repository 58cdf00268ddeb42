"""Open-system dynamics of the driven three-level model.

Density matrices are vectorised row-major, vec(ρ) = ρ.reshape(-1), so that
vec(A ρ B) = (A ⊗ Bᵀ) vec(ρ). Hamiltonians and Γ_gl are ordinary frequencies
(MHz) and the generator multiplies both by 2π; time is in μs.
"""

import logging
from dataclasses import dataclass
from math import pi, sqrt

import numpy as np

from lib.errors import (
    BasisMismatchError,
    DegenerateSteadyStateError,
    IntegrationError,
    NonHermitianError,
)
from lib.spin_model import Basis, Matrix3

logger = logging.getLogger(__name__)

TWO_PI = 2 * pi
NULL_SPACE_RCOND = 1e-10

# Index of |0⟩ in both orderings.
ZERO = 1


@dataclass(frozen=True)
class CollapseSet:
    """Optical repolarisation into |0⟩.

    Attributes
    ----------
    Gamma_gl : float
        Repolarisation rate (MHz); the operators are √(2πΓ_gl)|0⟩⟨±1|.
    basis : Basis
        Basis the operators are written in.
    """

    Gamma_gl: float = 10.0
    basis: Basis = Basis.DRESSED

    def __post_init__(self):
        if self.Gamma_gl < 0:
            raise ValueError(f"Gamma_gl must be non-negative (got {self.Gamma_gl})")


@dataclass(frozen=True)
class ReadoutModel:
    """Affine map from the |0⟩ population to a photon rate.

    Attributes
    ----------
    R_base : float
        Photon rate with the spin in |0⟩ (counts/s).
    C_max : float
        Fractional PL drop with the spin fully out of |0⟩.
    """

    R_base: float = 1e6
    C_max: float = 0.3

    def __post_init__(self):
        if self.R_base <= 0:
            raise ValueError(f"R_base must be positive (got {self.R_base})")
        if not 0 <= self.C_max < 1:
            raise ValueError(f"C_max must lie in [0, 1) (got {self.C_max})")


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A 3×3 density matrix tagged with its basis."""

    data: np.ndarray
    basis: Basis

    def __post_init__(self):
        data = np.asarray(self.data, dtype=complex)
        if data.shape != (3, 3):
            raise ValueError(f"expected a 3×3 matrix, got shape {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def populations(self) -> np.ndarray:
        """Diagonal of ρ as real numbers."""
        return self.data.diagonal().real.copy()

    def problems(self, tol: float = 1e-9) -> list[str]:
        """List the violated density-matrix properties.

        Parameters
        ----------
        tol : float
            Tolerance on trace, hermiticity and the eigenvalue floor.

        Returns
        -------
        list[str]
            Empty when ρ is a valid state.

        """
        issues = []
        if np.linalg.norm(self.data - self.data.conj().T) > tol:
            issues.append("not Hermitian")
        trace = np.trace(self.data)
        if abs(trace - 1) > tol:
            issues.append(f"trace {trace.real:.12f}")
        smallest = np.linalg.eigvalsh((self.data + self.data.conj().T) / 2)[0]
        if smallest < -tol:
            issues.append(f"negative eigenvalue {smallest:.3e}")
        return issues


def pure_state(index: int, basis: Basis = Basis.DRESSED) -> DensityMatrix:
    """Projector onto basis vector `index`."""
    data = np.zeros((3, 3), dtype=complex)
    data[index, index] = 1.0
    return DensityMatrix(data, basis)


@dataclass(frozen=True, eq=False)
class Liouvillian:
    """9×9 generator acting on row-major vectorised density matrices (1/μs)."""

    data: np.ndarray
    basis: Basis

    def trace_row_residual(self) -> float:
        """Norm of the row giving d Tr ρ / dt; zero for a trace-preserving map."""
        rows = self.data[[4 * i for i in range(3)], :]
        return float(np.linalg.norm(rows.sum(axis=0)))


def collapse_operators(c: CollapseSet, basis: Basis | None = None) -> list[np.ndarray]:
    """Jump operators √(2πΓ_gl)|0⟩⟨+1| and √(2πΓ_gl)|0⟩⟨−1|.

    Parameters
    ----------
    c : CollapseSet
        Rate and default basis.
    basis : Basis | None
        Overrides the basis of `c`.

    Returns
    -------
    list[np.ndarray]
        The two 3×3 operators.

    """
    basis = basis or c.basis
    zero = np.array([0, 1, 0], dtype=complex)
    if basis is Basis.BARE:
        plus = np.array([1, 0, 0], dtype=complex)
        minus = np.array([0, 0, 1], dtype=complex)
    else:
        # |±1⟩ = (|Bright⟩ ± |Dark⟩)/√2
        plus = np.array([1, 0, 1], dtype=complex) / sqrt(2)
        minus = np.array([1, 0, -1], dtype=complex) / sqrt(2)

    amplitude = sqrt(TWO_PI * c.Gamma_gl)
    return [amplitude * np.outer(zero, v.conj()) for v in (plus, minus)]


def build_liouvillian(H: Matrix3, c: CollapseSet) -> Liouvillian:
    """Superoperator of −i2π[H, ρ] + Σ (LρL† − ½{L†L, ρ}).

    Parameters
    ----------
    H : Matrix3
        Hamiltonian (MHz).
    c : CollapseSet
        Collapse operators, in the basis of `H`.

    Returns
    -------
    Liouvillian
        The generator.

    """
    if H.basis is not c.basis:
        raise BasisMismatchError(
            f"Hamiltonian is {H.basis.value} but collapse set is {c.basis.value}"
        )
    if not H.is_hermitian():
        raise NonHermitianError("Hamiltonian is not Hermitian")

    eye = np.eye(3)
    L = -1j * TWO_PI * (np.kron(H.data, eye) - np.kron(eye, H.data.T))
    for op in collapse_operators(c):
        rate = op.conj().T @ op
        L += np.kron(op, op.conj())
        L -= 0.5 * (np.kron(rate, eye) + np.kron(eye, rate.T))

    return Liouvillian(L, H.basis)


def apply_generator(H: Matrix3, c: CollapseSet, rho: np.ndarray) -> np.ndarray:
    """Evaluate dρ/dt directly from the master equation."""
    drho = -1j * TWO_PI * (H.data @ rho - rho @ H.data)
    for op in collapse_operators(c, H.basis):
        rate = op.conj().T @ op
        drho += op @ rho @ op.conj().T - 0.5 * (rate @ rho + rho @ rate)
    return drho


def steady_state(L: Liouvillian) -> DensityMatrix:
    """Normalised null vector of the generator.

    Parameters
    ----------
    L : Liouvillian
        Trace-preserving generator.

    Returns
    -------
    DensityMatrix
        Unique stationary state.

    Raises
    ------
    DegenerateSteadyStateError
        If the null space is not one-dimensional.

    """
    from scipy.linalg import null_space

    kernel = null_space(L.data, rcond=NULL_SPACE_RCOND)
    if kernel.shape[1] != 1:
        raise DegenerateSteadyStateError(kernel.shape[1])

    rho = kernel[:, 0].reshape(3, 3)
    rho = rho / np.trace(rho)
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho, L.basis)


def evolve(
    L: Liouvillian,
    rho0: DensityMatrix,
    t: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
) -> DensityMatrix:
    """Integrate dvec(ρ)/dt = L vec(ρ) up to time `t`.

    Parameters
    ----------
    L : Liouvillian
        Generator (1/μs).
    rho0 : DensityMatrix
        Initial state, in the basis of `L`.
    t : float
        Final time (μs).
    rtol : float
        Relative tolerance of the adaptive integrator.
    atol : float
        Absolute tolerance of the adaptive integrator.

    Returns
    -------
    DensityMatrix
        ρ(t).

    """
    from scipy.integrate import solve_ivp

    if rho0.basis is not L.basis:
        raise BasisMismatchError(
            f"state is {rho0.basis.value} but generator is {L.basis.value}"
        )
    if t < 0:
        raise ValueError(f"t must be non-negative (got {t})")
    if t == 0:
        return rho0

    generator = L.data
    sol = solve_ivp(
        lambda _, y: generator @ y,
        (0.0, t),
        rho0.data.reshape(-1),
        method="DOP853",
        rtol=rtol,
        atol=atol,
    )
    if sol.status != 0:
        raise IntegrationError(float(sol.t[-1]), sol.message)

    logger.debug(f"evolve reached t = {t} μs in {sol.nfev} evaluations")
    return DensityMatrix(sol.y[:, -1].reshape(3, 3), L.basis)


def trace_distance(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """½‖ρ − σ‖₁."""
    if rho.basis is not sigma.basis:
        raise BasisMismatchError("states are written in different bases")
    diff = rho.data - sigma.data
    return float(0.5 * np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2)).sum())


def pl_rate(rho: DensityMatrix, ro: ReadoutModel) -> float:
    """Photon rate R_base·(1 − C_max·(1 − ρ₀₀)) in counts/s."""
    p0 = float(rho.data[ZERO, ZERO].real)
    return ro.R_base * (1 - ro.C_max * (1 - p0))


def steady_pl(H: Matrix3, c: CollapseSet, ro: ReadoutModel) -> float:
    """Stationary photon rate of Hamiltonian `H`."""
    return pl_rate(steady_state(build_liouvillian(H, c)), ro)
