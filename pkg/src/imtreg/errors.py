"""Exception types raised across the package.

All errors derive from :class:`ImtregError` so callers (and the CLI) can
catch one base class and report the concrete category by class name.
"""


class ImtregError(ValueError):
    """Base class for all package-specific errors."""


class DegeneratePolygon(ImtregError):
    """Boundary polygon is self-intersecting, collinear, or has zero area."""


class MeshFailure(ImtregError):
    """Triangulation refinement could not produce a conforming mesh."""


class DegenerateTriangle(ImtregError):
    """Triangle has (numerically) zero area."""


class RankDeficientSpace(ImtregError):
    """Smoothness constraints admit no nontrivial spline space."""


class UnderdeterminedFit(ImtregError):
    """Unpenalized fit requested with design rank below the space dimension."""


class SpaceMismatch(ImtregError):
    """Coefficients or scores refer to a different spline space."""


class NonFiniteCovariance(ImtregError):
    """Covariance of the smoothed ensemble contains non-finite entries."""


class AllZeroSpectrum(ImtregError):
    """Eigenvalue sequence is identically zero; no basis can be selected."""


class ZeroAssociation(ImtregError):
    """All association weights vanish; association-based selection undefined."""


class SingularDesign(ImtregError):
    """Regression design is numerically singular."""


class SelectionFailure(ImtregError):
    """Basis-count selection produced an unusable configuration."""


class PositivityViolation(ImtregError):
    """Only one treatment arm present; positivity assumption unverifiable."""


class InvalidConfig(ImtregError):
    """Simulation or run configuration failed validation."""
