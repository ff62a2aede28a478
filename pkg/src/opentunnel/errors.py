"""Exception hierarchy; each category maps to a CLI exit status."""


class OpenTunnelError(Exception):
    exit_code = 1
    category = "error"


class ConfigurationError(OpenTunnelError, ValueError):
    exit_code = 2
    category = "configuration"


class DomainError(ConfigurationError):
    """Parameter outside the physical domain of an operation (e.g. T >= 2)."""

    category = "domain"


class UsageError(OpenTunnelError, ValueError):
    """Wrong kind of input for an operation (representation, shape)."""

    exit_code = 2
    category = "usage"


class DataError(OpenTunnelError, KeyError):
    exit_code = 2
    category = "data"

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DataIntegrityError(OpenTunnelError, ValueError):
    exit_code = 3
    category = "data-integrity"


class NumericalInstabilityError(OpenTunnelError, FloatingPointError):
    exit_code = 3
    category = "numerical-instability"


class ConvergenceError(OpenTunnelError, RuntimeError):
    exit_code = 4
    category = "non-convergence"

    def __init__(self, message, last_delta=None):
        super().__init__(message)
        self.last_delta = last_delta
