"""Exception types shared by the library."""


class DressedThermoError(Exception):
    """Base class of every error raised on purpose by the library."""


class ConfigError(DressedThermoError, ValueError):
    """Invalid scenario configuration.

    Parameters
    ----------
    diagnostics : list[str]
        One message per faulty field, prefixed by `section.key`.

    """

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics) or "invalid configuration")


class NumericalError(DressedThermoError, RuntimeError):
    """A numerical routine could not deliver a trustworthy result."""


class InvalidDriveError(DressedThermoError, ValueError):
    """The two tones cannot be addressed independently (γₑBz ≤ Ω)."""


class BasisMismatchError(DressedThermoError, ValueError):
    """Operators expressed in different bases were combined."""


class NonHermitianError(DressedThermoError, ValueError):
    """A Hamiltonian is not Hermitian."""


class DegenerateSteadyStateError(NumericalError):
    """The Liouvillian null space is not one-dimensional.

    Parameters
    ----------
    dimension : int
        Dimension of the null space found.

    """

    def __init__(self, dimension: int):
        self.dimension = dimension
        super().__init__(f"Liouvillian null space has dimension {dimension}")


class IntegrationError(NumericalError):
    """Time integration stopped before the requested time.

    Parameters
    ----------
    achieved : float
        Time reached by the integrator (μs).
    message : str
        Solver message.

    """

    def __init__(self, achieved: float, message: str):
        self.achieved = achieved
        super().__init__(f"integration stopped at t = {achieved} μs: {message}")


class FitError(NumericalError):
    """A least-squares fit did not converge.

    Parameters
    ----------
    message : str
        Reason of the failure.
    best : object
        Best iterate reached by the optimizer.

    """

    def __init__(self, message: str, best: object = None):
        self.best = best
        super().__init__(message)


class BackgroundLevelError(DressedThermoError, ValueError):
    """Three-point denominator is at the background level."""


class StabilityError(DressedThermoError, ValueError):
    """Explicit time step above the stability limit."""


class SourceMapError(DressedThermoError, ValueError):
    """Malformed or inconsistent heat source map."""


class ShapeMismatchError(DressedThermoError, ValueError):
    """Photon count arrays do not match the timing configuration."""
