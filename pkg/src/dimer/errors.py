"""Exception hierarchy; the CLI maps these onto exit codes."""


class DimerError(Exception):
    """Base class for all library errors."""

    stage: str | None = None


class ConfigurationError(DimerError, ValueError):
    pass


class SingularityError(DimerError, ArithmeticError):
    pass


class NumericalError(DimerError, ArithmeticError):
    pass


class SymmetryError(NumericalError):
    pass


class PreparationError(NumericalError):
    pass


class UnconvergedBasisError(NumericalError):
    def __init__(self, message: str, deficit: float):
        super().__init__(message)
        self.deficit = deficit


class TimingDetectionError(NumericalError):
    pass
