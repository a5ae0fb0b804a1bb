"""Benchmark quantities of the rising-bubble runs.

All bubble integrals run over the minus-phase elements with the full
curved-geometry quadrature; the interface length uses Gauss quadrature
along the curved interface edges.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assembly import GeometryTables, PhaseParams, default_rule, field_values
from .mesh import MINUS, Mesh
from .quadrature import edge_rule
from .reference import edge_local_nodes


@dataclass(frozen=True)
class BenchmarkRecord:
    t: float
    circularity: float
    center_of_mass: tuple[float, float]
    rise_velocity: float
    kinetic_energy: float
    potential_energy: float
    total_energy: float
    area_minus: float
    interface_length: float
    min_angle: float
    remesh_count: int

    CSV_HEADER = ("t,circularity,com_x,com_y,rise_velocity,"
                  "e_kin,e_pot,e_tot,area_minus,min_angle,remesh_count")

    def csv_row(self) -> str:
        vals = [self.t, self.circularity, self.center_of_mass[0],
                self.center_of_mass[1], self.rise_velocity,
                self.kinetic_energy, self.potential_energy,
                self.total_energy, self.area_minus, self.min_angle]
        return ",".join(f"{v:.17g}" for v in vals) + f",{self.remesh_count}"


def phase_area(mesh: Mesh, phase: int,
               geom: GeometryTables | None = None) -> float:
    geom = geom or GeometryTables(mesh, default_rule(mesh))
    mask = mesh.phase == phase
    return float(geom.wdet[mask].sum())


def center_of_mass(mesh: Mesh, geom: GeometryTables | None = None):
    """Centroid of the minus phase (the bubble)."""
    geom = geom or GeometryTables(mesh, default_rule(mesh))
    mask = mesh.phase == MINUS
    area = geom.wdet[mask].sum()
    cx = (geom.wdet[mask] * geom.x[mask, :, 0]).sum() / area
    cy = (geom.wdet[mask] * geom.x[mask, :, 1]).sum() / area
    return float(cx), float(cy)


def interface_length(mesh: Mesh) -> float:
    """Length of the (curved) interface by edge quadrature."""
    if len(mesh.interface_edges) == 0:
        return 0.0
    k = mesh.degree
    rule = edge_rule(2 * k + 2)
    s = rule.points[:, 0]
    params = np.concatenate([[0.0], np.arange(1, k) / k, [1.0]])
    V = np.vander(params, increasing=True)
    coeff = np.linalg.inv(V).T                       # (k+1, k+1) monomials
    D = np.zeros((len(s), k + 1))
    for m in range(1, k + 1):
        D[:, m] = m * s ** (m - 1)
    dbasis = coeff @ D.T                             # (k+1, Q)
    total = 0.0
    for e, le in mesh.interface_edges:
        ids = mesh.elements[e, edge_local_nodes(k, le)]
        pos = mesh.coords[ids]                       # nodes at sorted params
        tangent = np.einsum("lq,li->qi", dbasis, pos)
        total += float(rule.weights @ np.linalg.norm(tangent, axis=1))
    return total


def circularity(mesh: Mesh, geom: GeometryTables | None = None) -> float:
    """Perimeter of the area-equivalent circle over the bubble perimeter."""
    area = phase_area(mesh, MINUS, geom)
    return 2.0 * math.sqrt(math.pi * area) / interface_length(mesh)


def rise_velocity(mesh: Mesh, velocity_space, u: np.ndarray,
                  geom: GeometryTables | None = None) -> float:
    """Bubble average of the vertical velocity component."""
    geom = geom or GeometryTables(mesh, default_rule(mesh))
    mask = mesh.phase == MINUS
    uq = field_values(velocity_space, u, geom)       # (E, Q, 2)
    area = geom.wdet[mask].sum()
    return float((geom.wdet[mask] * uq[mask, :, 1]).sum() / area)


def energy(mesh: Mesh, velocity_space, u: np.ndarray, params: PhaseParams,
           geom: GeometryTables | None = None):
    """(kinetic, potential, total): 0.5 rho |u|^2 and rho g y integrals."""
    geom = geom or GeometryTables(mesh, default_rule(mesh))
    rho = params.rho_of(mesh.phase)
    uq = field_values(velocity_space, u, geom)
    kin = 0.5 * float(np.einsum("eq,eqi,eqi,e->", geom.wdet, uq, uq, rho))
    pot = float(np.einsum("eq,eq,e->", geom.wdet, geom.x[:, :, 1],
                          rho * params.g))
    return kin, pot, kin + pot
