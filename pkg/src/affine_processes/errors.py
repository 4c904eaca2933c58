"""Exception hierarchy shared by all modules."""


class AffineError(Exception):
    """Base class for every error raised by this package."""


class StructureError(AffineError, ValueError):
    """Inconsistent dimensions, non-symmetric matrices, malformed inputs."""


class AdmissibilityError(AffineError):
    """A model fails an admissibility constraint required by the operation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DomainError(AffineError, ValueError):
    """An argument lies outside the domain where the quantity is finite/defined."""


class SupportError(DomainError):
    """A point lies outside the support of a weight or state space."""


class ConfigurationError(AffineError, ValueError):
    """Incompatible options (for instance a Gaussian weight on a positive coordinate)."""


class MomentDomainError(DomainError):
    """A jump distribution lacks the moments required for a polynomial computation."""


class StiffnessError(AffineError, RuntimeError):
    """Step size collapsed although the solution norm stayed bounded."""

    def __init__(self, message, t=None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state


class UnsupportedParameterization(AffineError, ValueError):
    """The model is valid but not of the form an operation requires."""


class SchemaError(StructureError):
    """A JSON model document does not match the schema."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer
