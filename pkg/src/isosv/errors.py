"""Exception hierarchy shared by all modules."""


class IsoSVError(Exception):
    """Base class for library errors."""


class ConfigurationError(IsoSVError, ValueError):
    """Unsupported parameter (quadrature degree, size limits, CLI input)."""


class DomainError(IsoSVError, ValueError):
    """A point or entity lies outside the domain an operation accepts."""


class GeometryError(IsoSVError):
    """Non-positive Jacobian determinant or otherwise invalid cell map."""


class MeshGenerationError(IsoSVError):
    """The mesh generator could not satisfy its structural constraints."""


class InversionError(IsoSVError):
    """Newton inversion of a cell map did not converge."""


class SolverError(IsoSVError):
    """Factorization failed or the residual certificate was not met."""


class DegenerateCellError(GeometryError):
    """A local DOF system is too ill-conditioned to invert reliably."""
