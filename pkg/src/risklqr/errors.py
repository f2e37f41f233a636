"""Exception types shared across the package."""


class RiskLqrError(Exception):
    """Base class for all library errors."""


class DimensionError(RiskLqrError, ValueError):
    """Operands have invalid or incompatible shapes."""


class DefinitenessError(RiskLqrError, ValueError):
    """A matrix fails a required definiteness property."""


class InstabilityError(RiskLqrError, ValueError):
    """A closed loop is not stable where stability is required."""


class NonConvergenceError(RiskLqrError, RuntimeError):
    """An iterative solver exhausted its budget without meeting tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class NumericalError(RiskLqrError, RuntimeError):
    """A numerical kernel failed or produced an inconsistent result."""


class DivergenceError(RiskLqrError, RuntimeError):
    """A simulated trajectory exceeded the divergence guard."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConfigError(RiskLqrError, ValueError):
    """Invalid configuration value, option combination, or file."""


class SearchFailure(RiskLqrError, RuntimeError):
    """Random search could not proceed; carries the best iterate seen so far."""

    def __init__(self, message, policy=None, log=None):
        super().__init__(message)
        self.policy = policy
        self.log = log
