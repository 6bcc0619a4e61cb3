"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class NVCavityError(Exception):
    exit_code = 1


class DomainError(NVCavityError, ValueError):
    """An argument lies outside the physical domain of an operation."""

    exit_code = 1


class ValidationError(NVCavityError, ValueError):
    """Malformed input file or configuration document."""

    exit_code = 1


class ConfigurationError(ValidationError):
    pass


class CoverageError(NVCavityError, ValueError):
    exit_code = 1


class DegenerateError(NVCavityError, ValueError):
    """No unique answer exists (empty region, zero field, singular system)."""

    exit_code = 2


class NoResonanceError(DegenerateError):
    pass


class NonUniqueSteadyStateError(DegenerateError):
    def __init__(self, message, components=()):
        super().__init__(message)
        self.components = tuple(components)


class FitError(NVCavityError, RuntimeError):
    """Optimizer stopped without converging; ``best`` holds the best iterate."""

    exit_code = 3

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
