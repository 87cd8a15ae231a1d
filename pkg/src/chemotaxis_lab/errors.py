"""Exception hierarchy shared by every module."""

from __future__ import annotations


class ChemotaxisLabError(Exception):
    pass


class ValidationError(ChemotaxisLabError, ValueError):
    """Invalid input; ``path`` names the offending field when known."""

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ParseError(ChemotaxisLabError, ValueError):
    pass


class SingularSystem(ChemotaxisLabError, ArithmeticError):
    pass


class NonpositiveEquilibrium(ChemotaxisLabError, ArithmeticError):
    pass


class InvalidExponent(ChemotaxisLabError, ValueError):
    pass


class EmptyWindow(ChemotaxisLabError, ArithmeticError):
    pass


class NotSymmetric(ChemotaxisLabError, ValueError):
    pass


class RegimeMismatch(ChemotaxisLabError, ValueError):
    pass


class SolverDiverged(ChemotaxisLabError, ArithmeticError):
    pass


class NegativityBreach(ChemotaxisLabError, ArithmeticError):
    pass


class BlowUpGuard(ChemotaxisLabError, ArithmeticError):
    pass


class NonpositiveDensity(ChemotaxisLabError, ValueError):
    pass


class InsufficientData(ChemotaxisLabError, ValueError):
    pass
