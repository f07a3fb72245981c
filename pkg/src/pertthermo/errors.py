"""Exception hierarchy.

Every error carries an optional ``key`` naming the offending config path or
argument so that the CLI can report it verbatim.
"""


class PertThermoError(Exception):
    """Base class for all package errors."""

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class ValidationError(PertThermoError):
    """Invalid problem statement (maps to CLI exit code 2)."""


class NonHermitian(ValidationError):
    pass


class NotDensityMatrix(ValidationError):
    pass


class NotDiagonalInDeclaredBasis(ValidationError):
    pass


class DegenerateBasisAmbiguity(ValidationError):
    pass


class OutOfTable(ValidationError):
    """Custom sampled drive evaluated outside its sample table."""


class GridTooCoarse(ValidationError):
    pass


class GridMismatch(ValidationError):
    pass


class NotTwoLevel(ValidationError):
    pass


class ResonantInput(ValidationError):
    pass


class NonPositiveTemperature(ValidationError):
    pass


class ConfigParse(ValidationError):
    pass


class NumericalError(PertThermoError):
    """A numerical self-check failed (maps to CLI exit code 1)."""


class NonRealResult(NumericalError):
    pass


class StepUnstable(NumericalError):
    pass


class ContinuityLoss(NumericalError):
    pass


class IoFailure(PertThermoError):
    pass
