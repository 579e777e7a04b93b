"""Exception hierarchy shared by all modules."""


class BgdError(Exception):
    """Base class for every error raised by this package."""


class InvalidStructure(BgdError, ValueError):
    pass


class DisconnectedBase(InvalidStructure):
    pass


class IncompatibleStructure(InvalidStructure):
    def __init__(self, message, deviation=None, report=None):
        super().__init__(message)
        self.deviation = deviation
        self.report = report


class InvalidSymmetry(InvalidStructure):
    pass


class DepthOverflow(BgdError):
    pass


class CountOverflow(BgdError):
    pass


class SolveFailure(BgdError):
    pass


class Disconnection(BgdError):
    pass


class InvalidSpec(BgdError, ValueError):
    pass


class MissingTrace(BgdError, KeyError):
    pass


class DisconnectedAssembly(Disconnection):
    pass


class DegenerateDomain(BgdError):
    pass


class NoConvergence(BgdError):
    def __init__(self, message, width=None, iterations=None):
        super().__init__(message)
        self.width = width
        self.iterations = iterations


class WordNotAdmissible(BgdError, ValueError):
    pass


class MissingV0Data(BgdError, KeyError):
    pass


class NoComparablePoints(BgdError, ValueError):
    pass


class DepthMismatch(BgdError, ValueError):
    pass


class DisconnectedApproximation(BgdError):
    pass


class CapHit(BgdError):
    pass
