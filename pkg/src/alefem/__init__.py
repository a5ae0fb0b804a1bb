"""Interface-tracking ALE finite element solver for two-phase
incompressible flow on moving curved meshes."""

__version__ = "0.1.0"
