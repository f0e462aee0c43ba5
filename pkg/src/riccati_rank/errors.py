"""Exception hierarchy shared by all modules."""


class RiccatiRankError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(RiccatiRankError, ValueError):
    pass


class RankDeficient(RiccatiRankError):
    def __init__(self, column, message=None):
        self.column = column
        super().__init__(message or f"rank deficiency detected at column {column}")


class IllConditioned(RiccatiRankError):
    def __init__(self, estimate, message=None):
        self.estimate = estimate
        super().__init__(message or f"condition estimate {estimate:.3e} exceeds limit")


class NumericalBlowup(RiccatiRankError):
    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"non-finite or runaway values at step {step}")


class DegenerateInnovation(RiccatiRankError):
    pass


class GenerationFailure(RiccatiRankError):
    pass


class OutOfValidatedRange(RiccatiRankError):
    pass


class HypothesisFailed(RiccatiRankError):
    """Raised by oracle checks whose premise does not hold for the given input."""


class SpectralGapViolation(RiccatiRankError):
    pass
