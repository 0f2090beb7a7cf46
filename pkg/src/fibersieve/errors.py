"""Exception hierarchy shared by the library and the command line front end."""


class ConfigError(ValueError):
    """Invalid user supplied configuration or input file (CLI exit code 2)."""


class GeometryError(ConfigError):
    """Particle placement incompatible with the fiber geometry."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (CLI exit code 3)."""


class ModeCutoffError(NumericalError):
    """No guided HE11 root could be bracketed for the requested fiber."""


class SolverError(NumericalError):
    """Root finding did not converge to the requested residual."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ResonanceError(NumericalError):
    """Quasi-static polarizability evaluated at its pole."""
