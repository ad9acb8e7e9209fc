"""Advancing-front Delaunay mesh refinement.

2D and 3D conforming Delaunay refinement where each Steiner vertex is placed
by a combinatorial max-min optimizer inside the intersection of a picking
region and a petal (2D) or snow globe (3D), avoiding forbidden regions that
would create slivers.
"""

from .errors import (
    MeshError,
    ValidationError,
    GeometryError,
    FeasibleRegionEmpty,
    InsertionCapExceeded,
)
from .predicates import Sign, orient, in_circumsphere, circumsphere
from .plc import PLC, Facet
from .quality import RefinementConfig, QualityMeasures, measure, classify
from .triangulation import Mesh, VertexRecord, bootstrap, insert_vertex, delete_vertex, locate
from .refiner import refine, EventLog, InsertionEvent

__version__ = "0.1.0"

__all__ = [
    "MeshError",
    "ValidationError",
    "GeometryError",
    "FeasibleRegionEmpty",
    "InsertionCapExceeded",
    "Sign",
    "orient",
    "in_circumsphere",
    "circumsphere",
    "PLC",
    "Facet",
    "RefinementConfig",
    "QualityMeasures",
    "measure",
    "classify",
    "Mesh",
    "VertexRecord",
    "bootstrap",
    "insert_vertex",
    "delete_vertex",
    "locate",
    "refine",
    "EventLog",
    "InsertionEvent",
    "__version__",
]
