"""Exception hierarchy shared by all modules."""


class PhotonCertError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(PhotonCertError, ValueError):
    """Input outside the documented domain."""


class TruncationTooSevere(ValidationError):
    pass


class MismatchedLengths(ValidationError):
    pass


class BadWeights(ValidationError):
    pass


class ZeroMeanSource(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class BadTarget(ValidationError):
    pass


class BadOrderSet(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class DataError(PhotonCertError):
    """Problem with measured or recorded data rather than with parameters."""


class EmptyStream(DataError):
    pass


class InsufficientCounts(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InfeasibleError(PhotonCertError):
    """The data admit no distribution/yield vector: a calibration alarm."""


class InfeasibleConstraints(InfeasibleError):
    pass


class InfeasibleObservations(InfeasibleError):
    pass


class DegenerateDenominator(PhotonCertError, ArithmeticError):
    pass
