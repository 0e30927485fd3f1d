"""Curvature, integrability and flatness of prehomogeneous geometries on a single chart.

Three kinds of geometry are supported: absolute parallelisms (a frame field
``w``), affine structures (a symmetric object ``gamma``) and Riemannian pairs
``(g, gamma)``.  Every curvature object is computed from exact derivatives
(nested dual numbers) and cross-checked by path transport.
"""

from .catalog import GeometrySpec, build, builtin_catalog, dump_geometry, load_geometry, resolve
from .chart import Box, JetVector, OneArrow, TensorBlock, TwoArrow
from .errors import (
    DegenerateMetric,
    DomainError,
    DomainEscape,
    GeometryError,
    NotMetricArrow,
    NotMetricJet,
    NumericalError,
    OrderError,
    ParseError,
    SchemaError,
    SingularArrow,
    SingularFrame,
    SymmetryError,
    ZeroReference,
)
from .transport import certify_flat

__version__ = "0.1.0"

__all__ = [
    "Box",
    "DegenerateMetric",
    "DomainError",
    "DomainEscape",
    "GeometryError",
    "GeometrySpec",
    "JetVector",
    "NotMetricArrow",
    "NotMetricJet",
    "NumericalError",
    "OneArrow",
    "OrderError",
    "ParseError",
    "SchemaError",
    "SingularArrow",
    "SingularFrame",
    "SymmetryError",
    "TensorBlock",
    "TwoArrow",
    "ZeroReference",
    "build",
    "builtin_catalog",
    "certify_flat",
    "dump_geometry",
    "load_geometry",
    "resolve",
]
