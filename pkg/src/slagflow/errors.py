"""Exception hierarchy shared by all modules."""


class SlagflowError(Exception):
    pass


class DegenerateRoots(SlagflowError):
    """Two roots of the polynomial are closer than the separation tolerance."""


class BranchStep(SlagflowError):
    """Argument jump of at least pi/2 between consecutive samples of a path."""


class TooFewPoints(SlagflowError):
    pass


class LiftFailure(SlagflowError):
    """A phase increment exceeded pi, so the continuous lift is ambiguous."""


class WeightUndefined(SlagflowError):
    pass


class NearRoot(SlagflowError):
    """An interior curve point sits within eps_root of a root of p."""


class StepRejected(SlagflowError):
    def __init__(self, message, reason=None):
        super().__init__(message)
        self.reason = reason


class SplitFailed(SlagflowError):
    pass


class ShootStalled(SlagflowError):
    pass


class NotFound(SlagflowError):
    pass


class NotIntegral(SlagflowError):
    pass


class NonTerminating(SlagflowError):
    pass


class ConfigError(SlagflowError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
