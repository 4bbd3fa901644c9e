"""Error hierarchy shared by the engine modules and the CLI.

Every error carries a stable ``name`` that the CLI writes into its error
document. Input problems are also ``ValueError``s; numerical error states
derive from ``NumericalError``.
"""


class ConeLabError(Exception):
    """Base class for all toolkit errors."""

    @property
    def name(self):
        return type(self).__name__

    def to_dict(self):
        return {"error": self.name, "message": str(self)}


class NumericalError(ConeLabError):
    pass


# Input / contract errors

class DimensionMismatch(ConeLabError, ValueError):
    pass


class NonMonotone(ConeLabError, ValueError):
    pass


class PositiveEigenvalue(ConeLabError, ValueError):
    pass


class IdenticallyZero(ConeLabError, ValueError):
    pass


class UnsupportedCoefficient(ConeLabError, ValueError):
    pass


class UnsupportedOperator(ConeLabError, ValueError):
    pass


class UnsupportedExtension(ConeLabError, ValueError):
    pass


class NotDilationInvariant(ConeLabError, ValueError):
    pass


class WrongWeight(ConeLabError, ValueError):
    pass


class WeightOutOfRange(ConeLabError, ValueError):
    pass


class PoleOnLine(ConeLabError, ValueError):
    pass


class SampleOutsideSector(ConeLabError, ValueError):
    pass


class SlopeUndefined(ConeLabError, ValueError):
    pass


class InvalidDocument(ConeLabError, ValueError):
    """A JSON input document failed serializer validation."""

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details or {}

    def to_dict(self):
        data = super().to_dict()
        if self.details:
            data["details"] = self.details
        return data


# Numerical error states

class QuadratureFailure(NumericalError):
    pass


class IllConditioned(NumericalError):
    def __init__(self, message, mode=None, condition=None):
        super().__init__(message)
        self.mode = mode
        self.condition = condition

    def to_dict(self):
        data = super().to_dict()
        data["mode"] = self.mode
        data["condition"] = self.condition
        return data


class OracleInconclusive(NumericalError):
    pass


class E3Disagreement(NumericalError):
    pass
