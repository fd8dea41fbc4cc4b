"""Exception hierarchy shared by all isotrack modules."""


class IsotrackError(Exception):
    """Base class for every error raised by this package."""


class OutOfDomain(IsotrackError, ValueError):
    """Query point lies outside the region where a field is defined."""


class SingularPoint(IsotrackError, ValueError):
    """A derivative or angle is undefined at the query point."""


class EmptyRegion(IsotrackError, ValueError):
    pass


class InfeasibleLevel(IsotrackError, ValueError):
    pass


class ParseError(IsotrackError, ValueError):
    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class DimensionMismatch(IsotrackError, ValueError):
    pass


class NonpositiveStep(IsotrackError, ValueError):
    pass


class MissingOracle(IsotrackError, ValueError):
    pass


class InfeasibleMargin(IsotrackError, ValueError):
    pass


class BoundUndefined(IsotrackError, ValueError):
    pass


class PreconditionViolated(IsotrackError, ValueError):
    pass


class NotSymmetric(IsotrackError, ValueError):
    pass


class InvalidScenario(IsotrackError, ValueError):
    pass


class EmptyTrajectory(IsotrackError, ValueError):
    pass
