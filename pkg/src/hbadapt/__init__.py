"""Anisotropic mesh adaptation driven by hierarchical edge-bubble error estimates."""

from hbadapt.errors import (
    ConfigurationError,
    DimensionError,
    GeometryError,
    HbAdaptError,
    MeshParseError,
    SolverError,
    TopologyError,
)
from hbadapt.mesh import Mesh

__all__ = [
    "ConfigurationError",
    "DimensionError",
    "GeometryError",
    "HbAdaptError",
    "Mesh",
    "MeshParseError",
    "SolverError",
    "TopologyError",
]

__version__ = "0.1.0"
