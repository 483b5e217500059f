"""Numerical verification kit for the doubling construction of manifolds with corners.

Modules: ``core`` (chart tensor calculus), ``hypersurface`` (level-set
geometry), ``tube`` (the doubling tube and its curvature), ``corner``
(projection calculus at corners), ``scenarios`` (test geometries) and
``cli`` (batch driver).
"""

from .core import MetricField, ProductPoint, curvature, geodesic_flow, product_metric, sectional
from .errors import GeometryError, ScenarioError
from .scenarios import Scenario, builtin, load_scenario, serialize

__all__ = [
    "GeometryError",
    "MetricField",
    "ProductPoint",
    "Scenario",
    "ScenarioError",
    "builtin",
    "curvature",
    "geodesic_flow",
    "load_scenario",
    "product_metric",
    "sectional",
    "serialize",
]
