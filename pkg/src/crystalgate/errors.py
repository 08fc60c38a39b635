"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes, so each class carries ``exit_code``.
"""


class CrystalGateError(Exception):
    exit_code = 1


class ConfigError(CrystalGateError, ValueError):
    """Malformed or inconsistent configuration."""

    exit_code = 2


class PreconditionError(CrystalGateError, ValueError):
    """A physics precondition of an operation is violated."""

    exit_code = 3


class DegenerateInputError(PreconditionError):
    """Coincident ions (Coulomb singularity)."""


class InstabilityError(PreconditionError):
    """Hessian has a negative eigenvalue: the equilibrium is unstable."""


class ResonanceError(PreconditionError):
    """Carrier frequency too close to a phonon mode."""


class TruncationError(PreconditionError):
    """Fock-space truncation too small for the requested accuracy."""


class ConvergenceError(CrystalGateError, RuntimeError):
    """Iterative solver did not converge; ``last`` holds the final iterate."""

    exit_code = 4

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last
