"""Exception types raised across the package."""


class CtcDidError(Exception):
    """Base class for all package errors."""


class UnsupportedFormat(CtcDidError):
    pass


class EmptyDialect(CtcDidError):
    pass


class NoSpeechDetected(CtcDidError):
    pass


class UnknownDialect(CtcDidError, KeyError):
    pass


class InfeasibleTarget(CtcDidError, ValueError):
    pass


class NonFiniteInput(CtcDidError, ValueError):
    pass


class TooShort(CtcDidError, ValueError):
    pass


class AllTargetsInfeasible(CtcDidError):
    pass


class DivergedLoss(CtcDidError):
    """Training produced a non-finite loss.

    ``checkpoint`` holds the last parameters that gave a finite loss.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class EmptyEvaluation(CtcDidError):
    pass


class EmptyBin(CtcDidError):
    pass


class CheckpointError(CtcDidError):
    pass
