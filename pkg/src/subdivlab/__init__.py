"""Simulation and verification lab for random geometric subdivision chains."""

from .core import (
    DEFAULT_SEED,
    EQUILATERAL,
    EQUILATERAL_ANGLES,
    AngleTriple,
    Quadrilateral,
    RandomSource,
    ShapeCoord,
    UniformTriple,
    Vec2,
    shape_from_vertices,
)

__version__ = "0.1.0"
