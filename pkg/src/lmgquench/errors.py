"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems -> 1,
numerical failures -> 2, I/O failures -> 3.
"""


class ConfigError(ValueError):
    """Invalid configuration or parameter value."""


class BasisMismatchError(ValueError):
    """Operands built over different spin bases."""


class NumericalError(RuntimeError):
    """A numerical routine failed or left its validated regime."""


class EigensolveError(NumericalError):
    """Eigensolver did not converge; carries sector/index context."""

    def __init__(self, message, sector=None, index=None):
        super().__init__(message)
        self.sector = sector
        self.index = index


class NormDriftError(NumericalError):
    """State norm drifted beyond the configured tolerance."""

    def __init__(self, message, time=None, deviation=None):
        super().__init__(message)
        self.time = time
        self.deviation = deviation
