"""Exception hierarchy shared by all modules."""


class SteklovError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SteklovError, ValueError):
    """Bad input detected before any numerical work starts."""


class NumericalError(SteklovError, RuntimeError):
    """A numerical routine failed on otherwise valid input."""


# geometry
class InvalidSpec(ValidationError):
    pass


class DegenerateProfile(ValidationError):
    pass


class OutOfDomain(ValidationError):
    pass


class NonSimpleBoundary(ValidationError):
    pass


# meshgen / assembly
class MeshFailure(NumericalError):
    pass


class DegenerateTriangle(NumericalError):
    pass


# linalg
class NoConvergence(NumericalError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


# limit1d
class InvalidGrid(ValidationError):
    pass


class NoBracket(NumericalError):
    def __init__(self, message, interval=None):
        super().__init__(message)
        self.interval = interval


class PoleAt(ValidationError):
    pass


# asymptotics
class NonPositiveValue(ValidationError):
    pass


class OutsideTube(ValidationError):
    pass


class ZeroFunction(ValidationError):
    pass
