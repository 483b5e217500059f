"""Exception types raised by the geometry kernels."""


class GeometryError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(GeometryError, ValueError):
    """A point lies outside the chart domain, or too close to its edge."""


class DomainExitError(DomainError):
    """A geodesic left the chart domain before reaching its arclength."""

    def __init__(self, message, exit_parameter):
        super().__init__(message)
        self.exit_parameter = exit_parameter


class DegeneratePlaneError(GeometryError, ValueError):
    pass


class DegenerateSurfaceError(GeometryError, ValueError):
    """The defining function has (numerically) vanishing gradient."""


class FocalRegionError(GeometryError):
    """Foot-point projection failed; the point is probably past the focal radius."""


class PatchRadiusError(GeometryError):
    pass


class ImmersionError(GeometryError):
    """A parametrization has a degenerate induced metric."""


class SingularLiftError(GeometryError, ValueError):
    """No horizontal lift exists (cot(theta) singularity at the equator)."""


class DegenerateCornerError(GeometryError, ValueError):
    """The two walls are (numerically) tangent, so the corner normal vanishes."""


class FitError(GeometryError, ValueError):
    pass


class ScenarioError(GeometryError, ValueError):
    """Invalid scenario description. ``issues`` lists every problem found."""

    def __init__(self, issues):
        if isinstance(issues, str):
            issues = [issues]
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))
