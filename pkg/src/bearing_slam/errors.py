"""Exception types raised by the observer and simulator modules."""


class BearingSlamError(Exception):
    """Base class for all package errors."""


class DegenerateDirection(BearingSlamError):
    """A direction vector is too short to define a projector."""


class NonUnitBearing(BearingSlamError):
    """A visible bearing is too far from unit norm to be renormalized."""


class SingularNormalMatrix(BearingSlamError):
    """Accumulated regressor information has rank below three."""


class EmptyWindow(BearingSlamError):
    """An integration window contains no samples."""


class NoCertificate(BearingSlamError):
    """An excitation certificate of kind NONE was used where one is required."""


class ScenarioError(BearingSlamError):
    """A scenario configuration failed validation."""
