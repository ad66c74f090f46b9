"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point or parameter lies outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class SingularPointError(DomainError):
    """Evaluation requested exactly at a singular point (a cone vertex)."""


class SolverGateError(RuntimeError):
    """A solver quality gate (boundary residual, conditioning, ...) failed."""


class CorrectorError(RuntimeError):
    """The corrector solve refused (truncation too small or bad extraction)."""
