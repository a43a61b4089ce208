"""Exception hierarchy.

The CLI maps these onto process exit codes, so every failure raised by the
library falls into one of three families: configuration/geometry input
problems, data problems, and fits that did not converge.
"""


class CavityQEDError(Exception):
    """Base class for all library errors."""


class InputError(CavityQEDError, ValueError):
    """Physically or logically invalid input parameters."""


class UnstableGeometryError(InputError):
    """Resonator outside the stability region 0 <= g**2 <= 1."""


class SingularGeometryError(UnstableGeometryError):
    """Exactly concentric resonator, where waist and mode volume vanish."""


class NoRootError(InputError):
    """Requested value not attainable on the selected solution branch."""


class TargetUnreachableError(NoRootError):
    """Target coupling ratio not crossed inside the sweep range."""


class DegenerateInputError(InputError):
    pass


class NegativeLossError(InputError):
    """Finesse and mirror transmission imply a negative absorption loss."""


class DataError(CavityQEDError, ValueError):
    """Malformed or unusable measurement data."""


class DegenerateDataError(DataError):
    pass


class UnidentifiableLifetimeError(DegenerateDataError):
    pass


class SingularJacobianError(DataError):
    """A fit parameter has no effect on any residual."""


class ConvergenceError(CavityQEDError):
    """Raised by callers that require a converged fit."""
