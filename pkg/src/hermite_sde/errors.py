"""Exception hierarchy shared by all modules."""


class HermiteSdeError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(HermiteSdeError, ValueError):
    """Invalid construction parameter or experiment configuration."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DomainError(HermiteSdeError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class EvaluationError(HermiteSdeError, ArithmeticError):
    """A user-supplied field produced a non-finite value."""

    def __init__(self, message, node=None, time=None):
        super().__init__(message)
        self.node = node
        self.time = time


class SolverError(HermiteSdeError, ArithmeticError):
    """Coefficient integration failed at a given time node."""

    def __init__(self, message, time=None, stage=None):
        super().__init__(message)
        self.time = time
        self.stage = stage


class StartupError(SolverError):
    """The initial-condition limit could not be estimated."""

    def __init__(self, message, order=None):
        super().__init__(message, time=0.0, stage="startup")
        self.order = order


class StiffnessError(SolverError):
    """Right-hand side magnitude exceeded the stiffness guard."""
