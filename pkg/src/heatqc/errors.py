"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation (e.g. a non-positive scale)."""


class SingularityError(ValueError):
    """Point evaluation requested at a singular point of a weight."""


class ZeroMeanRequired(ValueError):
    """A square function was requested for a kernel whose integral is not zero."""


class ConfigError(ValueError):
    """Invalid run or quadrature configuration."""


class ToleranceNotMet(RuntimeError):
    """Panel budget exhausted before the requested tolerance was reached.

    The best available estimate travels with the exception in ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class NonDoublingSuspected(RuntimeError):
    """Shell masses of the integrand grow too fast for the tail bound to close."""

    def __init__(self, message, shell_ratios=None):
        super().__init__(message)
        self.shell_ratios = shell_ratios


class NonQuasiconformalSample(RuntimeError):
    """A sample with J <= 0 or |mu| >= 1 that the error budget cannot explain."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
