"""Exception hierarchy shared by all estimators and the simulation harness."""


class PhaseNoiseError(Exception):
    """Base class for every error raised by :mod:`pnest`."""


class InvalidModel(PhaseNoiseError, ValueError):
    pass


class NotPositiveDefinite(PhaseNoiseError, ValueError):
    pass


class SingularAutocorrelation(PhaseNoiseError, ValueError):
    pass


class UnsupportedOrder(PhaseNoiseError, ValueError):
    pass


class InconsistentBlock(PhaseNoiseError, ValueError):
    pass


class DimensionMismatch(PhaseNoiseError, ValueError):
    pass


class NoPilots(PhaseNoiseError, ValueError):
    pass


class TooFewPilots(PhaseNoiseError, ValueError):
    pass


class SingularHessian(PhaseNoiseError, ArithmeticError):
    pass


class SingularMatrix(PhaseNoiseError, ArithmeticError):
    pass


class UnstableAr(PhaseNoiseError, ValueError):
    pass


class NumericalBreakdown(PhaseNoiseError, ArithmeticError):
    """Kalman covariance lost positive semidefiniteness."""


class ConfigError(PhaseNoiseError, ValueError):
    """Invalid experiment configuration.

    ``line`` and ``field`` point at the offending entry when known.
    """

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field '{field}'")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
