"""Exception hierarchy.

Input problems derive from :class:`ValueError` so that callers (and the CLI)
can tell a bad request apart from a numerical failure.
"""


class SensorOptError(Exception):
    """Base class for every error raised by this package."""


class InputError(SensorOptError, ValueError):
    """An argument violates a documented precondition."""


class DimensionError(InputError):
    """Matrix shapes are inconsistent."""


class DegeneracyError(InputError):
    """M0 has (nearly) repeated eigenvalues; resample Q and L."""


class SolverError(SensorOptError, RuntimeError):
    """A numerical routine failed to converge or hit an unstable operator.

    Parameters
    ----------
    message : str
    history : list of float, optional
        Residual history up to the failure.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class StagnationError(SolverError):
    """Line search could not find a decrease."""


class ContinuationError(SolverError):
    """Tracking an extremal point in gamma failed."""

    def __init__(self, message, gamma=None, history=None):
        super().__init__(message, history)
        self.gamma = gamma


class ClassificationError(SolverError):
    """A flow limit does not match any invariant subspace of M."""


class InstabilityError(SolverError):
    """A stochastic simulation blew up."""
