"""Exception hierarchy shared by all modules."""


class VortexSlitError(Exception):
    """Base class for all package errors."""


class DomainError(VortexSlitError, ValueError):
    pass


class OutOfSupportError(DomainError):
    """Total transverse momentum lies outside the annulus."""


class NoSolutionError(VortexSlitError):
    """Kinematically closed channel."""


class SingularityError(VortexSlitError):
    """Momentum transfer too close to the photon pole."""


class EdgeSingularError(VortexSlitError):
    """Unsmeared evaluation exactly on an annulus edge (Jacobian diverges)."""


class QuadratureError(VortexSlitError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class EnvelopeError(VortexSlitError):
    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ContrastUndefinedError(VortexSlitError):
    pass


class ConsistencyError(VortexSlitError):
    pass


class ConfigError(VortexSlitError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
