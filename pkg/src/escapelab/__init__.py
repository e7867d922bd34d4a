"""escapelab: desk-scale numerics for geodesic escape rates, limit-set
dimensions and plane-wave limit measures on Euclidean and hyperbolic model
geometries."""

from . import dynamics, geometry, measures, quadrature, schottky, semiclassics, symbols

__all__ = [
    "dynamics",
    "geometry",
    "measures",
    "quadrature",
    "schottky",
    "semiclassics",
    "symbols",
]

__version__ = "0.1.0"
