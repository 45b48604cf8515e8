"""Exception types raised by the solvers and the harness."""


class BCSGPError(Exception):
    """Base class for all package errors."""


class NoBoundState(BCSGPError):
    """The two-body operator has no negative eigenvalue."""


class DegenerateGroundState(BCSGPError):
    """The two lowest two-body eigenvalues are not separated by a gap."""


class TailNotResolved(BCSGPError):
    """The bound state does not decay inside the relative-coordinate box."""


class FormulaMismatch(BCSGPError):
    """Two independent evaluations of the coupling constant disagree."""


class ResolutionError(BCSGPError):
    """The macroscopic grid does not resolve the pair size h."""


class MicroTailError(BCSGPError):
    """The rescaled bound state does not decay inside the macroscopic box."""


class InsufficientDilution(BCSGPError):
    """The pairing operator norm is too close to 1/2 for a pure state."""


class PurityFailure(BCSGPError):
    """An assembled pure state violates Gamma^2 = Gamma."""


class StepRejected(BCSGPError):
    """A time step kept failing its trace-drift check after halving."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class NonFiniteField(BCSGPError):
    """A field acquired NaN or infinite samples."""


class GridMismatch(BCSGPError):
    """Two fields live on incompatible grids."""


class InsufficientData(BCSGPError):
    """Too few successful runs to fit a convergence slope."""
