"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Operands have incompatible Hilbert-space dimensions."""


class NonHermitianError(ValueError):
    """A matrix that must be Hermitian deviates from its adjoint."""


class ConvergenceError(RuntimeError):
    """A numerical routine failed to converge."""


class SizeGuardError(ValueError):
    """A requested system exceeds the dense-storage budget."""


class TrivialObservableError(ValueError):
    """The observable is proportional to the identity."""


class ConfigError(ValueError):
    """A scenario configuration is malformed.

    ``field`` names the offending ``section.key`` when known.
    """

    def __init__(self, message, field=None):
        if field is not None:
            message = f"[{field}] {message}"
        super().__init__(message)
        self.field = field


class DegenerateSpectrumWarning(UserWarning):
    """Dephasing arguments assume gaps that this spectrum does not have."""
