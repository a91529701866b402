"""Spectral simulation and verification toolkit for energy-critical
Schrodinger maps into S^2 and H^2 with the heat-flow (caloric) gauge."""

from .manifold import (HYPERBOLIC, SPHERE, MapField, TargetManifold,
                       constant_map, cross_mu, dot_mu, energy, exp_map, mass,
                       project_to_target, tangent_project)
from .spectral import GridSpec, LPBandSet, SpaceTimeField

__all__ = [
    "HYPERBOLIC", "SPHERE", "MapField", "TargetManifold", "constant_map",
    "cross_mu", "dot_mu", "energy", "exp_map", "mass", "project_to_target",
    "tangent_project", "GridSpec", "LPBandSet", "SpaceTimeField",
]

__version__ = "0.1.0"
